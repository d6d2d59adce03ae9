use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;
use crate::error::{Error, Result};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub frozen: bool,
}

/// Named parameters with frozen flags, an initialization RNG and free-form
/// metadata (schedule state, model dimensions) carried into checkpoints.
#[derive(Clone, Debug)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, usize>,
    seed: u64,
    rng: ChaCha8Rng,
    pub meta: BTreeMap<String, String>,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.seed == other.seed && self.meta == other.meta
    }
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: BTreeMap::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            meta: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::config(format!("duplicate parameter '{name}'")));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::config(format!("invalid parameter name '{name}'")));
        }
        let id = self.params.len();
        self.by_name.insert(name.to_string(), id);
        self.params.push(Param {
            name: name.to_string(),
            value,
            frozen: false,
        });
        Ok(ParamId(id))
    }

    /// Adds a parameter drawn from uniform(-0.1, 0.1).
    pub fn add_uniform(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        let data = (0..rows * cols)
            .map(|_| self.rng.random_range(-INIT_SCALE..INIT_SCALE))
            .collect();
        self.add(name, Matrix::from_vec(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Matrix::zeros(rows, cols))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.params[id.0].frozen = frozen;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.params[id.0].frozen
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| !p.frozen)
            .map(|p| p.value.len())
            .sum()
    }

    pub(crate) fn restore(seed: u64, params: Vec<Param>, meta: BTreeMap<String, String>) -> Result<Self> {
        let mut store = ParamStore::new(seed);
        for p in params {
            let id = store.add(&p.name, p.value)?;
            store.set_frozen(id, p.frozen);
        }
        store.meta = meta;
        Ok(store)
    }
}

/// Gradient buffers parallel to a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    g: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros(store: &ParamStore) -> Self {
        Gradients {
            g: store
                .params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.g[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.g[id.0]
    }

    pub fn clear(&mut self) {
        for m in &mut self.g {
            m.fill(0.0);
        }
    }

    /// L2 norm over the trainable parameters of `store`.
    pub fn norm(&self, store: &ParamStore) -> f64 {
        self.g
            .iter()
            .zip(&store.params)
            .filter(|(_, p)| !p.frozen)
            .map(|(g, _)| g.sum_sq())
            .sum::<f64>()
            .sqrt()
    }
}
