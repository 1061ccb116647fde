//! GRU cells and fully connected layers recorded on a [`Graph`].

use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::{Init, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Weights of one GRU cell.
///
/// `w_*` are input-to-hidden `[H x I]`, `u_*` hidden-to-hidden `[H x H]`,
/// `b_*` biases `[H]`. The reset gate multiplies the previous state before
/// the `u_h` product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruParams {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut m = |name: &str, shape: &[usize], init| {
            store.add_init(&format!("{prefix}.{name}"), shape, init, rng)
        };
        Ok(GruParams {
            w_z: m("w_z", &[hidden, input], Init::Glorot)?,
            w_r: m("w_r", &[hidden, input], Init::Glorot)?,
            w_h: m("w_h", &[hidden, input], Init::Glorot)?,
            u_z: m("u_z", &[hidden, hidden], Init::Glorot)?,
            u_r: m("u_r", &[hidden, hidden], Init::Glorot)?,
            u_h: m("u_h", &[hidden, hidden], Init::Glorot)?,
            b_z: m("b_z", &[hidden], Init::Zeros)?,
            b_r: m("b_r", &[hidden], Init::Zeros)?,
            b_h: m("b_h", &[hidden], Init::Zeros)?,
            input,
            hidden,
        })
    }

    pub fn param_ids(&self) -> [ParamId; 9] {
        [
            self.w_z, self.w_r, self.w_h, self.u_z, self.u_r, self.u_h, self.b_z, self.b_r,
            self.b_h,
        ]
    }

    fn gate(&self, g: &mut Graph, w: ParamId, u: ParamId, b: ParamId, x: Var, h: Var) -> Result<Var> {
        let wx = g.matvec(w, x)?;
        let uh = g.matvec(u, h)?;
        let bias = g.param(b);
        g.sum(&[wx, uh, bias])
    }

    /// One recurrence step: `(1 - z) * h + z * tanh(W_h x + U_h (r * h) + b_h)`.
    pub fn step(&self, g: &mut Graph, h: Var, x: Var) -> Result<Var> {
        if g.len_of(x) != self.input || g.len_of(h) != self.hidden {
            return Err(Error::shape(format!(
                "gru expects input {} / hidden {}, got {} / {}",
                self.input,
                self.hidden,
                g.len_of(x),
                g.len_of(h)
            )));
        }
        let z_pre = self.gate(g, self.w_z, self.u_z, self.b_z, x, h)?;
        let z = g.sigmoid(z_pre);
        let r_pre = self.gate(g, self.w_r, self.u_r, self.b_r, x, h)?;
        let r = g.sigmoid(r_pre);
        let rh = g.mul(r, h)?;
        let cand_pre = self.gate(g, self.w_h, self.u_h, self.b_h, x, rh)?;
        let cand = g.tanh(cand_pre);
        let keep = g.one_minus(z);
        let old = g.mul(keep, h)?;
        let new = g.mul(z, cand)?;
        g.add(old, new)
    }

    /// Fold the cell over `xs`; `reversed` walks right to left. Returns the
    /// state after every input (in visiting order) and the last state.
    pub fn forward(&self, g: &mut Graph, h0: Var, xs: &[Var], reversed: bool) -> Result<(Vec<Var>, Var)> {
        let mut h = h0;
        let mut states = Vec::with_capacity(xs.len());
        let order: Box<dyn Iterator<Item = &Var>> = if reversed {
            Box::new(xs.iter().rev())
        } else {
            Box::new(xs.iter())
        };
        for x in order {
            h = self.step(g, h, *x)?;
            states.push(h);
        }
        Ok((states, h))
    }
}

/// Per-position concatenation of a forward and a backward GRU pass.
pub fn bigru_forward(g: &mut Graph, fwd: &GruParams, bwd: &GruParams, xs: &[Var]) -> Result<Vec<Var>> {
    if xs.is_empty() {
        return Err(Error::input("bidirectional GRU over an empty sequence"));
    }
    let h0f = g.zeros(fwd.hidden);
    let h0b = g.zeros(bwd.hidden);
    let (fs, _) = fwd.forward(g, h0f, xs, false)?;
    let (mut bs, _) = bwd.forward(g, h0b, xs, true)?;
    bs.reverse();
    Ok(fs
        .into_iter()
        .zip(bs)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

/// A fully connected layer `activation(W x + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        output: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(Dense {
            w: store.add_init(&format!("{prefix}.w"), &[output, input], Init::Glorot, rng)?,
            b: store.add_init(&format!("{prefix}.b"), &[output], Init::Zeros, rng)?,
            input,
            output,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var, activation: Activation) -> Result<Var> {
        let wx = g.matvec(self.w, x)?;
        let b = g.param(self.b);
        let pre = g.add(wx, b)?;
        Ok(apply(g, pre, activation))
    }
}

pub(crate) fn apply(g: &mut Graph, x: Var, activation: Activation) -> Var {
    match activation {
        Activation::None => x,
        Activation::Relu => g.relu(x),
        Activation::Tanh => g.tanh(x),
        Activation::Sigmoid => g.sigmoid(x),
        Activation::Softmax => g.softmax(x),
    }
}

/// Evaluate a single GRU step on plain vectors.
pub fn gru_step(store: &ParamStore, params: &GruParams, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut g = Graph::new(store);
    let h = g.input(h.to_vec());
    let x = g.input(x.to_vec());
    let out = params.step(&mut g, h, x)?;
    Ok(g.value(out).to_vec())
}

/// Fold a GRU over plain vectors; returns all states and the last state.
pub fn gru_forward(
    store: &ParamStore,
    params: &GruParams,
    h0: &[f64],
    xs: &[Vec<f64>],
    reversed: bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut g = Graph::new(store);
    let h0 = g.input(h0.to_vec());
    let xs: Vec<Var> = xs.iter().map(|x| g.input(x.clone())).collect();
    let (states, last) = params.forward(&mut g, h0, &xs, reversed)?;
    Ok((
        states.iter().map(|s| g.value(*s).to_vec()).collect(),
        g.value(last).to_vec(),
    ))
}

/// `activation(W x + b)` on plain vectors.
pub fn dense(w: &[Vec<f64>], b: &[f64], x: &[f64], activation: Activation) -> Result<Vec<f64>> {
    let rows = w.len();
    let cols = x.len();
    if b.len() != rows || w.iter().any(|r| r.len() != cols) {
        return Err(Error::shape(format!(
            "dense: weight {rows}x?, bias {}, input {cols}",
            b.len()
        )));
    }
    let mut store = ParamStore::new();
    let flat: Vec<f64> = w.iter().flatten().copied().collect();
    let wid = store.add("w", super::Tensor::from_vec(&[rows, cols], flat)?)?;
    let bid = store.add("b", super::Tensor::from_vec(&[rows], b.to_vec())?)?;
    let layer = Dense {
        w: wid,
        b: bid,
        input: cols,
        output: rows,
    };
    let mut g = Graph::new(&store);
    let xv = g.input(x.to_vec());
    let y = layer.forward(&mut g, xv, activation)?;
    Ok(g.value(y).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{seeded_rng, Tensor};

    fn zero_gru(input: usize, hidden: usize) -> (ParamStore, GruParams) {
        let mut store = ParamStore::new();
        let mut rng = seeded_rng(0);
        let p = GruParams::new(&mut store, "g", input, hidden, &mut rng).unwrap();
        for id in p.param_ids() {
            store.get_mut(id).data.iter_mut().for_each(|x| *x = 0.0);
        }
        (store, p)
    }

    #[test]
    fn zero_params_zero_state_stays_zero() {
        let (store, p) = zero_gru(3, 2);
        let h = gru_step(&store, &p, &[0.0, 0.0], &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_the_state() {
        let (store, p) = zero_gru(1, 2);
        let h = gru_step(&store, &p, &[0.8, -0.4], &[0.0]).unwrap();
        assert_eq!(h, vec![0.4, -0.2]);
    }

    #[test]
    fn single_candidate_weight_closed_form() {
        let (mut store, p) = zero_gru(1, 1);
        *store.get_mut(p.w_h) = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        let h = gru_step(&store, &p, &[0.0], &[1.0]).unwrap();
        // z = 0.5, candidate = tanh(1)
        assert!((h[0] - 0.380797).abs() < 1e-6);
        assert!((h[0] - 0.5 * 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let (store, p) = zero_gru(2, 2);
        assert!(gru_step(&store, &p, &[0.0], &[1.0, 2.0]).is_err());
        assert!(gru_step(&store, &p, &[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn forward_boundaries() {
        let mut store = ParamStore::new();
        let p = GruParams::new(&mut store, "g", 2, 3, &mut seeded_rng(7)).unwrap();
        let h0 = [0.1, -0.2, 0.3];
        let (states, last) = gru_forward(&store, &p, &h0, &[], false).unwrap();
        assert!(states.is_empty());
        assert_eq!(last, h0.to_vec());

        let x1 = vec![0.5, -1.0];
        let x2 = vec![2.0, 0.25];
        let (_, one) = gru_forward(&store, &p, &h0, std::slice::from_ref(&x1), false).unwrap();
        assert_eq!(one, gru_step(&store, &p, &h0, &x1).unwrap());

        let (_, rev) = gru_forward(&store, &p, &h0, &[x1.clone(), x2.clone()], true).unwrap();
        let (_, fwd) = gru_forward(&store, &p, &h0, &[x2, x1], false).unwrap();
        assert_eq!(rev, fwd);
    }

    #[test]
    fn state_stays_in_hull_of_previous_and_candidate() {
        let mut store = ParamStore::new();
        let p = GruParams::new(&mut store, "g", 2, 4, &mut seeded_rng(3)).unwrap();
        let h = [0.9, -1.7, 0.2, 3.0];
        let out = gru_step(&store, &p, &h, &[4.0, -5.0]).unwrap();
        for (o, hi) in out.iter().zip(h) {
            assert!(o.abs() <= hi.abs().max(1.0) + 1e-12);
        }
    }

    #[test]
    fn bigru_shapes_and_single_step() {
        let mut store = ParamStore::new();
        let mut rng = seeded_rng(1);
        let f = GruParams::new(&mut store, "f", 2, 3, &mut rng).unwrap();
        let b = GruParams::new(&mut store, "b", 2, 3, &mut rng).unwrap();
        let mut g = Graph::new(&store);
        let empty: Vec<Var> = vec![];
        assert!(bigru_forward(&mut g, &f, &b, &empty).is_err());
        let xs: Vec<Var> = (0..4).map(|i| g.input(vec![i as f64, 1.0])).collect();
        let out = bigru_forward(&mut g, &f, &b, &xs).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|o| g.len_of(*o) == 6));

        let x = vec![0.3, -0.6];
        let mut g = Graph::new(&store);
        let xv = g.input(x.clone());
        let out = bigru_forward(&mut g, &f, &b, &[xv]).unwrap();
        let mut expect = gru_step(&store, &f, &[0.0; 3], &x).unwrap();
        expect.extend(gru_step(&store, &b, &[0.0; 3], &x).unwrap());
        assert_eq!(g.value(out[0]), expect.as_slice());
    }

    #[test]
    fn bigru_palindrome_symmetry() {
        // Same weights both ways on a palindrome: position t's forward half
        // equals position (n-1-t)'s backward half.
        let mut store = ParamStore::new();
        let f = GruParams::new(&mut store, "f", 1, 1, &mut seeded_rng(11)).unwrap();
        let b = f;
        let mut g = Graph::new(&store);
        let xs = [g.input(vec![0.7]), g.input(vec![0.7])];
        let out = bigru_forward(&mut g, &f, &b, &xs).unwrap();
        let o0 = g.value(out[0]).to_vec();
        let o1 = g.value(out[1]).to_vec();
        assert_eq!(o0[0], o1[1]);
        assert_eq!(o0[1], o1[0]);
        // brute force: h1 = step(0, x), h2 = step(h1, x)
        let h1 = gru_step(&store, &f, &[0.0], &[0.7]).unwrap();
        let h2 = gru_step(&store, &f, &h1, &[0.7]).unwrap();
        assert_eq!(o0, vec![h1[0], h2[0]]);
    }

    #[test]
    fn dense_examples() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(dense(&id, &[0.0, 0.0], &[3.0, -4.0], Activation::None).unwrap(), vec![3.0, -4.0]);
        assert_eq!(dense(&id, &[0.0, 0.0], &[0.0, 0.0], Activation::Softmax).unwrap(), vec![0.5, 0.5]);
        assert_eq!(dense(&id, &[0.0, 0.0], &[-1.0, 2.0], Activation::Relu).unwrap(), vec![0.0, 2.0]);
        assert!(dense(&id, &[0.0], &[1.0, 1.0], Activation::None).is_err());
    }
}
