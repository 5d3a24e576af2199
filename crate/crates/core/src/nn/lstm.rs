use rand::Rng;

use super::{Expr, Graph, NnError, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone)]
struct Layer {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
    h0: ParamId,
    c0: ParamId,
}

/// Multi-layer LSTM. Gates are stacked as `[input; forget; output; candidate]` in each
/// weight matrix; every layer has a learned initial hidden and cell state.
#[derive(Debug, Clone)]
pub struct LstmParams {
    layers: Vec<Layer>,
    input_dim: usize,
    hidden_dim: usize,
}

#[derive(Debug, Clone)]
pub struct LstmState {
    pub h: Vec<Expr>,
    pub c: Vec<Expr>,
}

impl LstmState {
    /// Hidden state of the last layer.
    pub fn output(&self) -> Expr {
        *self.h.last().expect("LSTM without layers")
    }
}

impl LstmParams {
    /// Registers the tensors as `{prefix}.l{layer}.{wx,wh,b,h0,c0}`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        layers: usize,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let in_dim = if l == 0 { input_dim } else { hidden_dim };
                let mut b = Tensor::zeros(&[4 * hidden_dim]);
                b.data_mut()[hidden_dim..2 * hidden_dim].fill(1.0);
                Layer {
                    wx: store.add(
                        format!("{prefix}.l{l}.wx"),
                        Tensor::glorot(4 * hidden_dim, in_dim, rng),
                        true,
                    ),
                    wh: store.add(
                        format!("{prefix}.l{l}.wh"),
                        Tensor::glorot(4 * hidden_dim, hidden_dim, rng),
                        true,
                    ),
                    b: store.add(format!("{prefix}.l{l}.b"), b, true),
                    h0: store.add(
                        format!("{prefix}.l{l}.h0"),
                        Tensor::zeros(&[hidden_dim]),
                        true,
                    ),
                    c0: store.add(
                        format!("{prefix}.l{l}.c0"),
                        Tensor::zeros(&[hidden_dim]),
                        true,
                    ),
                }
            })
            .collect();
        LstmParams {
            layers,
            input_dim,
            hidden_dim,
        }
    }

    /// Looks up tensors registered by [`LstmParams::new`] under `prefix`.
    pub fn find(store: &ParamStore, prefix: &str, layers: usize) -> Result<Self, NnError> {
        let get = |l: usize, name: &str| {
            store
                .id(&format!("{prefix}.l{l}.{name}"))
                .ok_or_else(|| NnError::Shape(format!("missing tensor {prefix}.l{l}.{name}")))
        };
        let mut out = Vec::with_capacity(layers);
        for l in 0..layers {
            out.push(Layer {
                wx: get(l, "wx")?,
                wh: get(l, "wh")?,
                b: get(l, "b")?,
                h0: get(l, "h0")?,
                c0: get(l, "c0")?,
            });
        }
        let first = out
            .first()
            .ok_or_else(|| NnError::Shape("LSTM without layers".into()))?;
        let wx = store.value(first.wx);
        Ok(LstmParams {
            input_dim: wx.cols(),
            hidden_dim: wx.rows() / 4,
            layers: out,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn initial(&self, g: &mut Graph) -> LstmState {
        LstmState {
            h: self.layers.iter().map(|l| g.param(l.h0)).collect(),
            c: self.layers.iter().map(|l| g.param(l.c0)).collect(),
        }
    }

    pub fn step(&self, g: &mut Graph, prev: &LstmState, x: Expr) -> Result<LstmState, NnError> {
        if g.dim(x) != self.input_dim {
            return Err(NnError::Dimension {
                what: "LSTM input",
                expected: self.input_dim,
                found: g.dim(x),
            });
        }
        let hd = self.hidden_dim;
        let mut input = x;
        let mut next = LstmState {
            h: Vec::with_capacity(self.layers.len()),
            c: Vec::with_capacity(self.layers.len()),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let wx = g.param(layer.wx);
            let wh = g.param(layer.wh);
            let b = g.param(layer.b);
            let xpart = g.matvec(wx, input);
            let hpart = g.matvec(wh, prev.h[l]);
            let pre = g.sum_all(&[xpart, hpart, b]);
            let i = g.slice(pre, 0, hd);
            let i = g.sigmoid(i);
            let f = g.slice(pre, hd, hd);
            let f = g.sigmoid(f);
            let o = g.slice(pre, 2 * hd, hd);
            let o = g.sigmoid(o);
            let cand = g.slice(pre, 3 * hd, hd);
            let cand = g.tanh(cand);
            let keep = g.mul(f, prev.c[l]);
            let write = g.mul(i, cand);
            let c = g.add(keep, write);
            let tc = g.tanh(c);
            let h = g.mul(o, tc);
            next.h.push(h);
            next.c.push(c);
            input = h;
        }
        Ok(next)
    }

    /// Runs the LSTM over `xs` from the initial state and returns the final output.
    pub fn run(&self, g: &mut Graph, xs: &[Expr]) -> Result<Expr, NnError> {
        let mut state = self.initial(g);
        for &x in xs {
            state = self.step(g, &state, x)?;
        }
        Ok(state.output())
    }
}

/// An LSTM whose history can be popped back to any earlier state. The summary is the
/// last layer's hidden state at the top; an empty stack reports the learned initial state.
#[derive(Debug, Clone)]
pub struct StackLstm<'l> {
    lstm: &'l LstmParams,
    states: Vec<LstmState>,
}

impl<'l> StackLstm<'l> {
    pub fn new(lstm: &'l LstmParams, g: &mut Graph) -> Self {
        StackLstm {
            lstm,
            states: vec![lstm.initial(g)],
        }
    }

    pub fn push(&mut self, g: &mut Graph, x: Expr) -> Result<(), NnError> {
        let next = self.lstm.step(g, self.states.last().unwrap(), x)?;
        self.states.push(next);
        Ok(())
    }

    pub fn pop(&mut self) {
        assert!(self.states.len() > 1, "pop from an empty stack-LSTM");
        self.states.pop();
    }

    pub fn summary(&self) -> Expr {
        self.states.last().unwrap().output()
    }

    pub fn len(&self) -> usize {
        self.states.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(seed: u64) -> (ParamStore, LstmParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let lstm = LstmParams::new(&mut store, "lstm", 2, 3, 4, &mut rng);
        (store, lstm)
    }

    #[test]
    fn zero_weights_give_zero_hidden() {
        let (mut store, lstm) = small(1);
        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for id in ids {
            store.value_mut(id).data_mut().fill(0.0);
        }
        let mut g = Graph::new(&store);
        let s0 = lstm.initial(&mut g);
        let x = g.input(vec![0.0; 3]);
        let s1 = lstm.step(&mut g, &s0, x).unwrap();
        assert!(g.value(s1.output()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let (store, lstm) = small(1);
        let mut g = Graph::new(&store);
        let s0 = lstm.initial(&mut g);
        let x = g.input(vec![0.0; 5]);
        assert!(matches!(
            lstm.step(&mut g, &s0, x),
            Err(NnError::Dimension {
                expected: 3,
                found: 5,
                ..
            })
        ));
    }

    #[test]
    fn golden_step() {
        let (store, lstm) = small(7);
        let mut g = Graph::new(&store);
        let s0 = lstm.initial(&mut g);
        let x = g.input(vec![1.0, 0.0, 0.0]);
        let s1 = lstm.step(&mut g, &s0, x).unwrap();
        let got = g.value(s1.output()).to_vec();
        for (a, b) in got.iter().zip(GOLDEN) {
            assert!((a - b).abs() < 1e-12, "{got:?}");
        }
    }

    // Captured from the reference run with seed 7.
    const GOLDEN: [f64; 4] = [
        0.007307047654229295,
        -0.005455080803349368,
        0.00041879416385192747,
        -0.0012373373854449945,
    ];

    #[test]
    fn push_pop_restores_summary() {
        let (store, lstm) = small(2);
        let mut g = Graph::new(&store);
        let mut stack = StackLstm::new(&lstm, &mut g);
        let empty = stack.summary();
        let a = g.input(vec![0.5, -0.1, 0.3]);
        stack.push(&mut g, a).unwrap();
        let after_a = g.value(stack.summary()).to_vec();
        let b = g.input(vec![-1.0, 0.2, 0.9]);
        stack.push(&mut g, b).unwrap();
        assert_ne!(g.value(stack.summary()), &after_a[..]);
        stack.pop();
        assert_eq!(g.value(stack.summary()), &after_a[..]);
        stack.pop();
        assert_eq!(stack.summary(), empty);
        assert!(stack.is_empty());
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        let (store, lstm) = small(3);
        let build = |s: &ParamStore, g: &mut Graph| {
            let _ = s;
            let s0 = lstm.initial(g);
            let x1 = g.input(vec![0.3, -0.7, 0.2]);
            let x2 = g.input(vec![-0.4, 0.1, 0.9]);
            let s1 = lstm.step(g, &s0, x1).unwrap();
            let s2 = lstm.step(g, &s1, x2).unwrap();
            let w = g.input(vec![1.0, -2.0, 0.5, 0.7]);
            let prod = g.mul(s2.output(), w);
            let c = g.sum(s2.c[0]);
            let p = g.sum(prod);
            let l = g.sum_all(&[p, c]);
            g.sum(l)
        };
        let grads = {
            let mut g = Graph::new(&store);
            let l = build(&store, &mut g);
            g.backward(l).unwrap()
        };
        let h = 1e-5;
        for (id, p) in store.iter() {
            for i in 0..p.value.len() {
                let eval = |delta: f64| {
                    let mut s = store.clone();
                    s.value_mut(id).data_mut()[i] += delta;
                    let mut g = Graph::new(&s);
                    let l = build(&s, &mut g);
                    g.scalar(l)
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = grads.at(id, i);
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!((analytic - numeric).abs() / scale < 1e-6, "{}[{i}]", p.name);
            }
        }
    }
}
