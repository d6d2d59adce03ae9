use super::{axpy, Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hidden and cell state of one LSTM step.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Single LSTM layer. Gate rows are stacked as input, forget, candidate,
/// output, each `hidden` rows tall.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    input: usize,
    hidden: usize,
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Activations saved by [`LstmLayer::forward`] for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmCache {
    dir: Direction,
    steps: Vec<Step>,
}

impl LstmLayer {
    /// Registers `{name}.wx`, `{name}.wh` and `{name}.b` in `store`.
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::config("LSTM dimensions must be positive"));
        }
        Ok(LstmLayer {
            input,
            hidden,
            wx: store.add_uniform(&format!("{name}.wx"), 4 * hidden, input)?,
            wh: store.add_uniform(&format!("{name}.wh"), 4 * hidden, hidden)?,
            b: store.add_uniform(&format!("{name}.b"), 4 * hidden, 1)?,
        })
    }

    /// Looks the layer up in a restored store.
    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self> {
        let get = |s: &str| {
            store
                .id(&format!("{name}.{s}"))
                .ok_or_else(|| Error::config(format!("missing parameter {name}.{s}")))
        };
        let (wx, wh, b) = (get("wx")?, get("wh")?, get("b")?);
        let hidden = store.get(wh).cols();
        let input = store.get(wx).cols();
        if store.get(wx).rows() != 4 * hidden
            || store.get(wh).rows() != 4 * hidden
            || store.get(b).rows() != 4 * hidden
        {
            return Err(Error::config(format!("inconsistent LSTM shapes for {name}")));
        }
        Ok(LstmLayer { input, hidden, wx, wh, b })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn gates(&self, store: &ParamStore, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = store.get(self.b).data().to_vec();
        store.get(self.wx).gemv_add(x, &mut z);
        store.get(self.wh).gemv_add(h, &mut z);
        let n = self.hidden;
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * n..3 * n).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        z
    }

    /// One recurrence step; returns the activated gates alongside the state.
    fn cell(&self, store: &ParamStore, x: &[f64], prev: &LstmState) -> (LstmState, Vec<f64>, Vec<f64>) {
        let n = self.hidden;
        let a = self.gates(store, x, &prev.h);
        let mut c = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut tc = vec![0.0; n];
        for j in 0..n {
            c[j] = a[n + j] * prev.c[j] + a[j] * a[2 * n + j];
            tc[j] = c[j].tanh();
            h[j] = a[3 * n + j] * tc[j];
        }
        (LstmState { h, c }, a, tc)
    }

    pub fn step(&self, store: &ParamStore, x: &[f64], prev: &LstmState) -> Result<LstmState> {
        self.check_input(x)?;
        Ok(self.cell(store, x, prev).0)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input {
            return Err(Error::config(format!(
                "LSTM input dimension {} does not match layer input {}",
                x.len(),
                self.input
            )));
        }
        Ok(())
    }

    /// Runs the layer over `inputs`; the reverse direction processes the
    /// reversed sequence. Outputs are aligned with input positions.
    pub fn forward(
        &self,
        store: &ParamStore,
        inputs: &[Vec<f64>],
        dir: Direction,
    ) -> Result<(Vec<Vec<f64>>, LstmCache)> {
        for x in inputs {
            self.check_input(x)?;
        }
        let t_len = inputs.len();
        let mut outputs = vec![Vec::new(); t_len];
        let mut steps = Vec::with_capacity(t_len);
        let mut state = LstmState::zeros(self.hidden);
        for k in 0..t_len {
            let t = match dir {
                Direction::Forward => k,
                Direction::Reverse => t_len - 1 - k,
            };
            let (next, gates, tanh_c) = self.cell(store, &inputs[t], &state);
            outputs[t] = next.h.clone();
            steps.push(Step {
                x: inputs[t].clone(),
                h_prev: std::mem::take(&mut state.h),
                c_prev: std::mem::take(&mut state.c),
                gates,
                tanh_c,
            });
            state = next;
        }
        Ok((outputs, LstmCache { dir, steps }))
    }

    /// Backpropagation through time. `d_outputs` is aligned with input
    /// positions; returns input gradients when `want_inputs` is set.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &LstmCache,
        d_outputs: &[Vec<f64>],
        grads: &mut Gradients,
        want_inputs: bool,
    ) -> Vec<Vec<f64>> {
        let n = self.hidden;
        let t_len = cache.steps.len();
        debug_assert_eq!(d_outputs.len(), t_len);
        let mut d_inputs = if want_inputs {
            vec![vec![0.0; self.input]; t_len]
        } else {
            Vec::new()
        };
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dz = vec![0.0; 4 * n];
        let wx = store.get(self.wx);
        let wh = store.get(self.wh);
        for k in (0..t_len).rev() {
            let t = match cache.dir {
                Direction::Forward => k,
                Direction::Reverse => t_len - 1 - k,
            };
            let s = &cache.steps[k];
            let a = &s.gates;
            for j in 0..n {
                let dh = d_outputs[t][j] + dh_next[j];
                let (i, f, g, o) = (a[j], a[n + j], a[2 * n + j], a[3 * n + j]);
                let tc = s.tanh_c[j];
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[n + j] = dc * s.c_prev[j] * f * (1.0 - f);
                dz[2 * n + j] = dc * i * (1.0 - g * g);
                dz[3 * n + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            grads.get_mut(self.wx).add_outer(1.0, &dz, &s.x);
            grads.get_mut(self.wh).add_outer(1.0, &dz, &s.h_prev);
            axpy(1.0, &dz, grads.get_mut(self.b).data_mut());
            dh_next.fill(0.0);
            wh.gemv_t_add(&dz, &mut dh_next);
            if want_inputs {
                wx.gemv_t_add(&dz, &mut d_inputs[t]);
            }
        }
        d_inputs
    }
}

/// Forward and reverse LSTM layers whose outputs are concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmLayer {
    pub fwd: LstmLayer,
    pub bwd: LstmLayer,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

impl BiLstmLayer {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize) -> Result<Self> {
        Ok(BiLstmLayer {
            fwd: LstmLayer::new(store, &format!("{name}.fwd"), input, hidden)?,
            bwd: LstmLayer::new(store, &format!("{name}.bwd"), input, hidden)?,
        })
    }

    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self> {
        Ok(BiLstmLayer {
            fwd: LstmLayer::from_store(store, &format!("{name}.fwd"))?,
            bwd: LstmLayer::from_store(store, &format!("{name}.bwd"))?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim() + self.bwd.hidden_dim()
    }

    pub fn forward(&self, store: &ParamStore, inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, BiLstmCache)> {
        let (f, fc) = self.fwd.forward(store, inputs, Direction::Forward)?;
        let (b, bc) = self.bwd.forward(store, inputs, Direction::Reverse)?;
        let out = f.into_iter().zip(b).map(|(mut x, y)| {
            x.extend(y);
            x
        });
        Ok((out.collect(), BiLstmCache { fwd: fc, bwd: bc }))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &BiLstmCache,
        d_outputs: &[Vec<f64>],
        grads: &mut Gradients,
        want_inputs: bool,
    ) -> Vec<Vec<f64>> {
        let h = self.fwd.hidden_dim();
        let df: Vec<Vec<f64>> = d_outputs.iter().map(|d| d[..h].to_vec()).collect();
        let db: Vec<Vec<f64>> = d_outputs.iter().map(|d| d[h..].to_vec()).collect();
        let mut dx = self.fwd.backward(store, &cache.fwd, &df, grads, want_inputs);
        let dx_b = self.bwd.backward(store, &cache.bwd, &db, grads, want_inputs);
        for (a, b) in dx.iter_mut().zip(&dx_b) {
            axpy(1.0, b, a);
        }
        dx
    }
}

/// Affine map `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    w: ParamId,
    b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize) -> Result<Self> {
        Ok(Linear {
            w: store.add_uniform(&format!("{name}.w"), output, input)?,
            b: store.add_uniform(&format!("{name}.b"), output, 1)?,
        })
    }

    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self> {
        let get = |s: &str| {
            store
                .id(&format!("{name}.{s}"))
                .ok_or_else(|| Error::config(format!("missing parameter {name}.{s}")))
        };
        Ok(Linear { w: get("w")?, b: get("b")? })
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.w).cols()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.w).rows()
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let mut y = store.get(self.b).data().to_vec();
        store.get(self.w).gemv_add(x, &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, store: &ParamStore, x: &[f64], dy: &[f64], grads: &mut Gradients) -> Vec<f64> {
        grads.get_mut(self.w).add_outer(1.0, dy, x);
        axpy(1.0, dy, grads.get_mut(self.b).data_mut());
        let mut dx = vec![0.0; x.len()];
        store.get(self.w).gemv_t_add(dy, &mut dx);
        dx
    }
}
