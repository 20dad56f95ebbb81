//! Entity-aware LSTM.
//!
//! The input gate is computed once per basin from the static features,
//!
//! ```text
//! i    = σ(W_i·x_s + b_i)
//! f[t] = σ(W_f·x_d[t] + U_f·h[t−1] + b_f)
//! g[t] = tanh(W_g·x_d[t] + U_g·h[t−1] + b_g)
//! o[t] = σ(W_o·x_d[t] + U_o·h[t−1] + b_o)
//! c[t] = f[t] ⊙ c[t−1] + i ⊙ g[t]
//! h[t] = o[t] ⊙ tanh(c[t])
//! ```
//!
//! and a linear head maps the last hidden state to one streamflow value
//! (sequence-to-one). [`backward`] is the hand-written reverse-mode adjoint
//! of [`forward`]; the static-feature gradient only flows through `i`.
//!
//! Dynamic inputs are passed as row-major `T × n_d` slices.

use crate::numcore::{matvec_acc, matvec_t_acc, outer_acc, sigmoid_scalar, Matrix, SeededRng};
use crate::{Error, Result};

/// Weights of one recurrent gate (forget, cell input or output).
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    /// `H × n_d` input weights.
    pub w: Matrix,
    /// `H × H` recurrent weights.
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(hidden: usize, n_dynamic: usize) -> Self {
        Self {
            w: Matrix::zeros(hidden, n_dynamic),
            u: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    #[inline]
    fn preactivation(&self, x: &[f64], h_prev: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b);
        matvec_acc(&self.w, x, out);
        matvec_acc(&self.u, h_prev, out);
    }
}

/// All learnable parameters, plus the linear output head.
#[derive(Clone, Debug, PartialEq)]
pub struct EaLstmParams {
    /// `H × n_s` static-input weights of the input gate.
    pub w_i: Matrix,
    pub b_i: Vec<f64>,
    pub forget: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

/// Names of the parameter tensors in [`EaLstmParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 13] = [
    "w_i", "b_i", "w_f", "u_f", "b_f", "w_g", "u_g", "b_g", "w_o", "u_o", "b_o", "head_w", "head_b",
];

impl EaLstmParams {
    pub fn zeros(hidden: usize, n_static: usize, n_dynamic: usize) -> Self {
        Self {
            w_i: Matrix::zeros(hidden, n_static),
            b_i: vec![0.0; hidden],
            forget: GateParams::zeros(hidden, n_dynamic),
            cell: GateParams::zeros(hidden, n_dynamic),
            output: GateParams::zeros(hidden, n_dynamic),
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    /// Default initialization: every weight matrix and the head weights are
    /// uniform on `[−1/√H, 1/√H)`, `b_f = 3`, all other biases 0.
    ///
    /// Draw order is `w_i, w_f, u_f, w_g, u_g, w_o, u_o, head_w`, each
    /// row-major, from one [`SeededRng::new(seed)`](SeededRng::new) stream.
    pub fn init(hidden: usize, n_static: usize, n_dynamic: usize, seed: u64) -> Self {
        let mut p = Self::zeros(hidden, n_static, n_dynamic);
        let a = 1.0 / (hidden as f64).sqrt();
        let mut rng = SeededRng::new(seed);
        let mut fill = |m: &mut [f64]| m.iter_mut().for_each(|v| *v = rng.uniform(-a, a));
        fill(p.w_i.as_mut_slice());
        for gate in [&mut p.forget, &mut p.cell, &mut p.output] {
            fill(gate.w.as_mut_slice());
            fill(gate.u.as_mut_slice());
        }
        fill(&mut p.head_w);
        p.forget.b.iter_mut().for_each(|b| *b = 3.0);
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.b_i.len()
    }

    pub fn n_static(&self) -> usize {
        self.w_i.cols()
    }

    pub fn n_dynamic(&self) -> usize {
        self.forget.w.cols()
    }

    /// Parameter tensors as flat slices, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[f64]; 13] {
        [
            self.w_i.as_slice(),
            &self.b_i,
            self.forget.w.as_slice(),
            self.forget.u.as_slice(),
            &self.forget.b,
            self.cell.w.as_slice(),
            self.cell.u.as_slice(),
            &self.cell.b,
            self.output.w.as_slice(),
            self.output.u.as_slice(),
            &self.output.b,
            &self.head_w,
            std::slice::from_ref(&self.head_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 13] {
        [
            self.w_i.as_mut_slice(),
            &mut self.b_i,
            self.forget.w.as_mut_slice(),
            self.forget.u.as_mut_slice(),
            &mut self.forget.b,
            self.cell.w.as_mut_slice(),
            self.cell.u.as_mut_slice(),
            &mut self.cell.b,
            self.output.w.as_mut_slice(),
            self.output.u.as_mut_slice(),
            &mut self.output.b,
            &mut self.head_w,
            std::slice::from_mut(&mut self.head_b),
        ]
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Checks mutual shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size();
        let n_d = self.n_dynamic();
        let check = |context: &'static str, expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::Shape {
                    context,
                    expected,
                    actual,
                })
            }
        };
        check("w_i rows", h, self.w_i.rows())?;
        for gate in [&self.forget, &self.cell, &self.output] {
            check("gate w rows", h, gate.w.rows())?;
            check("gate w cols", n_d, gate.w.cols())?;
            check("gate u rows", h, gate.u.rows())?;
            check("gate u cols", h, gate.u.cols())?;
            check("gate bias", h, gate.b.len())?;
        }
        check("head_w", h, self.head_w.len())?;
        if self
            .tensors()
            .iter()
            .any(|t| t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Contract(
                "parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &EaLstmParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

/// Recurrent state `(h, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, as needed by the adjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCache {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Input gate `σ(W_i·x_s + b_i)`.
pub fn static_gate(p: &EaLstmParams, x_s: &[f64]) -> Result<Vec<f64>> {
    if x_s.len() != p.n_static() {
        return Err(Error::Shape {
            context: "static_gate x_s",
            expected: p.n_static(),
            actual: x_s.len(),
        });
    }
    let mut i = p.b_i.clone();
    matvec_acc(&p.w_i, x_s, &mut i);
    i.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    Ok(i)
}

/// Per-step output slots inside a [`ForwardCache`].
struct StepSlots<'a> {
    f: &'a mut [f64],
    g: &'a mut [f64],
    o: &'a mut [f64],
    c: &'a mut [f64],
    h: &'a mut [f64],
    tanh_c: &'a mut [f64],
}

#[inline]
fn step_into(
    p: &EaLstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    i: &[f64],
    out: StepSlots<'_>,
) -> bool {
    p.forget.preactivation(x, h_prev, out.f);
    p.cell.preactivation(x, h_prev, out.g);
    p.output.preactivation(x, h_prev, out.o);
    let mut finite = true;
    for k in 0..i.len() {
        let f = sigmoid_scalar(out.f[k]);
        let g = out.g[k].tanh();
        let o = sigmoid_scalar(out.o[k]);
        let c = f * c_prev[k] + i[k] * g;
        let tc = c.tanh();
        let h = o * tc;
        out.f[k] = f;
        out.g[k] = g;
        out.o[k] = o;
        out.c[k] = c;
        out.tanh_c[k] = tc;
        out.h[k] = h;
        finite &= c.is_finite() && h.is_finite();
    }
    finite
}

/// One recurrent step given the precomputed input gate `i`.
pub fn cell_step(
    p: &EaLstmParams,
    x_d_t: &[f64],
    prev: &CellState,
    i: &[f64],
) -> Result<(CellState, StepCache)> {
    let h = p.hidden_size();
    for (context, expected, actual) in [
        ("cell_step x_d", p.n_dynamic(), x_d_t.len()),
        ("cell_step h_prev", h, prev.h.len()),
        ("cell_step c_prev", h, prev.c.len()),
        ("cell_step input gate", h, i.len()),
    ] {
        if expected != actual {
            return Err(Error::Shape {
                context,
                expected,
                actual,
            });
        }
    }
    let mut buf = vec![0.0; 6 * h];
    let (f, rest) = buf.split_at_mut(h);
    let (g, rest) = rest.split_at_mut(h);
    let (o, rest) = rest.split_at_mut(h);
    let (c, rest) = rest.split_at_mut(h);
    let (hh, tanh_c) = rest.split_at_mut(h);
    let ok = step_into(
        p,
        x_d_t,
        &prev.h,
        &prev.c,
        i,
        StepSlots {
            f,
            g,
            o,
            c,
            h: hh,
            tanh_c,
        },
    );
    if !ok {
        return Err(Error::NumericFault { step: 0 });
    }
    let cache = StepCache {
        f: f.to_vec(),
        g: g.to_vec(),
        o: o.to_vec(),
        c: c.to_vec(),
        h: hh.to_vec(),
    };
    Ok((
        CellState {
            h: cache.h.clone(),
            c: cache.c.clone(),
        },
        cache,
    ))
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    hidden: usize,
    steps: usize,
    x_s: Vec<f64>,
    x_d: Vec<f64>,
    init: CellState,
    input_gate: Vec<f64>,
    // T × H, row t holds step t.
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl ForwardCache {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn input_gate(&self) -> &[f64] {
        &self.input_gate
    }

    pub fn static_input(&self) -> &[f64] {
        &self.x_s
    }

    fn row<'a>(&self, buf: &'a [f64], t: usize) -> &'a [f64] {
        &buf[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn hidden(&self, t: usize) -> &[f64] {
        self.row(&self.h, t)
    }

    pub fn cell(&self, t: usize) -> &[f64] {
        self.row(&self.c, t)
    }

    pub fn step(&self, t: usize) -> StepCache {
        StepCache {
            f: self.row(&self.f, t).to_vec(),
            g: self.row(&self.g, t).to_vec(),
            o: self.row(&self.o, t).to_vec(),
            c: self.cell(t).to_vec(),
            h: self.hidden(t).to_vec(),
        }
    }

    fn prev_h(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.init.h
        } else {
            self.hidden(t - 1)
        }
    }

    fn prev_c(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.init.c
        } else {
            self.cell(t - 1)
        }
    }
}

/// Runs the sequence from zero state and applies the head to `h[T]`.
pub fn forward(p: &EaLstmParams, x_s: &[f64], x_d: &[f64]) -> Result<(f64, ForwardCache)> {
    forward_from(p, x_s, x_d, &CellState::zeros(p.hidden_size()))
}

/// [`forward`] with an explicit initial state.
pub fn forward_from(
    p: &EaLstmParams,
    x_s: &[f64],
    x_d: &[f64],
    init: &CellState,
) -> Result<(f64, ForwardCache)> {
    let hidden = p.hidden_size();
    let n_d = p.n_dynamic();
    if n_d == 0 || x_d.is_empty() || x_d.len() % n_d != 0 {
        return Err(Error::Contract(format!(
            "dynamic input must be a non-empty T x {n_d} matrix, got {} values",
            x_d.len()
        )));
    }
    if init.h.len() != hidden || init.c.len() != hidden {
        return Err(Error::Shape {
            context: "forward initial state",
            expected: hidden,
            actual: init.h.len().min(init.c.len()),
        });
    }
    let steps = x_d.len() / n_d;
    let input_gate = static_gate(p, x_s)?;
    let n = steps * hidden;
    let mut cache = ForwardCache {
        hidden,
        steps,
        x_s: x_s.to_vec(),
        x_d: x_d.to_vec(),
        init: init.clone(),
        input_gate,
        f: vec![0.0; n],
        g: vec![0.0; n],
        o: vec![0.0; n],
        c: vec![0.0; n],
        h: vec![0.0; n],
        tanh_c: vec![0.0; n],
    };
    for t in 0..steps {
        let span = t * hidden..(t + 1) * hidden;
        // Split the state buffers so step t can read row t−1 while writing row t.
        let (c_done, c_rest) = cache.c.split_at_mut(span.start);
        let (h_done, h_rest) = cache.h.split_at_mut(span.start);
        let (h_prev, c_prev) = if t == 0 {
            (&cache.init.h[..], &cache.init.c[..])
        } else {
            (
                &h_done[span.start - hidden..],
                &c_done[span.start - hidden..],
            )
        };
        let ok = step_into(
            p,
            &x_d[t * n_d..(t + 1) * n_d],
            h_prev,
            c_prev,
            &cache.input_gate,
            StepSlots {
                f: &mut cache.f[span.clone()],
                g: &mut cache.g[span.clone()],
                o: &mut cache.o[span.clone()],
                c: &mut c_rest[..hidden],
                h: &mut h_rest[..hidden],
                tanh_c: &mut cache.tanh_c[span.clone()],
            },
        );
        if !ok {
            return Err(Error::NumericFault { step: t });
        }
    }
    let h_last = cache.hidden(steps - 1);
    let mut yhat = p.head_b;
    for (w, h) in p.head_w.iter().zip(h_last) {
        yhat += w * h;
    }
    if !yhat.is_finite() {
        return Err(Error::NumericFault { step: steps - 1 });
    }
    Ok((yhat, cache))
}

/// Gradients of one scalar prediction.
#[derive(Clone, Debug)]
pub struct SequenceGrads {
    pub d_params: EaLstmParams,
    /// Gradient w.r.t. the static features (through the input gate only).
    pub d_xs: Vec<f64>,
    /// `T × n_d` gradient w.r.t. the dynamic inputs.
    pub d_xd: Matrix,
}

/// Reverse-mode adjoint of [`forward`] for cotangent `d_yhat`.
pub fn backward(cache: &ForwardCache, p: &EaLstmParams, d_yhat: f64) -> Result<SequenceGrads> {
    let hidden = p.hidden_size();
    let n_d = p.n_dynamic();
    let n_s = p.n_static();
    if cache.hidden != hidden || cache.x_s.len() != n_s || cache.x_d.len() != cache.steps * n_d {
        return Err(Error::Contract(
            "forward cache does not match parameter shapes".into(),
        ));
    }
    let steps = cache.steps;
    let mut d = EaLstmParams::zeros(hidden, n_s, n_d);
    let mut d_xd = Matrix::zeros(steps, n_d);
    let i = &cache.input_gate;

    let h_last = cache.hidden(steps - 1);
    d.head_b = d_yhat;
    for k in 0..hidden {
        d.head_w[k] = h_last[k] * d_yhat;
    }
    let mut dh: Vec<f64> = p.head_w.iter().map(|w| w * d_yhat).collect();
    let mut dc_next = vec![0.0; hidden];
    let mut d_gate_in = vec![0.0; hidden];

    let mut za_f = vec![0.0; hidden];
    let mut za_g = vec![0.0; hidden];
    let mut za_o = vec![0.0; hidden];

    for t in (0..steps).rev() {
        let f = cache.row(&cache.f, t);
        let g = cache.row(&cache.g, t);
        let o = cache.row(&cache.o, t);
        let tc = cache.row(&cache.tanh_c, t);
        let c_prev = cache.prev_c(t);
        let h_prev = cache.prev_h(t);
        let x_t = &cache.x_d[t * n_d..(t + 1) * n_d];

        for k in 0..hidden {
            let d_o = dh[k] * tc[k];
            let dc = dc_next[k] + dh[k] * o[k] * (1.0 - tc[k] * tc[k]);
            let d_f = dc * c_prev[k];
            let d_g = dc * i[k];
            d_gate_in[k] += dc * g[k];
            dc_next[k] = dc * f[k];
            za_f[k] = d_f * f[k] * (1.0 - f[k]);
            za_g[k] = d_g * (1.0 - g[k] * g[k]);
            za_o[k] = d_o * o[k] * (1.0 - o[k]);
        }

        let dx = &mut d_xd.as_mut_slice()[t * n_d..(t + 1) * n_d];
        let mut dh_prev = vec![0.0; hidden];
        for (gate, dgate, za) in [
            (&p.forget, &mut d.forget, &za_f),
            (&p.cell, &mut d.cell, &za_g),
            (&p.output, &mut d.output, &za_o),
        ] {
            outer_acc(&mut dgate.w, za, x_t);
            outer_acc(&mut dgate.u, za, h_prev);
            for (b, z) in dgate.b.iter_mut().zip(za.iter()) {
                *b += z;
            }
            matvec_t_acc(&gate.w, za, dx);
            matvec_t_acc(&gate.u, za, &mut dh_prev);
        }
        dh = dh_prev;
    }

    let z_i: Vec<f64> = (0..hidden)
        .map(|k| d_gate_in[k] * i[k] * (1.0 - i[k]))
        .collect();
    outer_acc(&mut d.w_i, &z_i, &cache.x_s);
    d.b_i.copy_from_slice(&z_i);
    let mut d_xs = vec![0.0; n_s];
    matvec_t_acc(&p.w_i, &z_i, &mut d_xs);

    Ok(SequenceGrads {
        d_params: d,
        d_xs,
        d_xd,
    })
}
