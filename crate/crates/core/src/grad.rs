//! Vector-Jacobian products, gradient accumulation and finite-difference
//! verification.
//!
//! Every differentiable routine in this crate ships a hand-written backward
//! pass. [`DifferentiableOp`] wraps a forward/backward pair behind flat `f64`
//! buffers so that ops can be chained with [`Compose`] and checked with
//! [`fd_check`].

use std::any::Any;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Which primal quantity a cotangent array is aligned with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    /// Packed mesh vertex positions, 3 values per vertex.
    Verts,
    /// Packed point positions, 3 values per point.
    Points,
    /// Packed per-point or per-vertex features.
    Features,
    /// Per-fragment-slot opacities.
    Alphas,
    /// Per-fragment-slot colors.
    Colors,
    /// Light parameters: ambient, diffuse, specular RGB.
    Light,
    /// Dense weights (graph convolution W0, W1, bias concatenated).
    Weights,
}

/// Cotangent accumulator keyed by primal quantity.
///
/// Addition is the only mutation. Each quantity's length is fixed by its
/// first accumulation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradBuffer {
    slots: BTreeMap<Quantity, Vec<f64>>,
    counts: BTreeMap<Quantity, usize>,
}

impl GradBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, q: Quantity, values: &[f64]) -> Result<()> {
        match self.slots.get_mut(&q) {
            Some(slot) => {
                if slot.len() != values.len() {
                    return Err(Error::shape(format!(
                        "{q:?} gradient has length {} but {} was accumulated",
                        slot.len(),
                        values.len()
                    )));
                }
                for (s, v) in slot.iter_mut().zip(values) {
                    *s += v;
                }
            }
            None => {
                self.slots.insert(q, values.to_vec());
            }
        }
        *self.counts.entry(q).or_default() += 1;
        Ok(())
    }

    pub fn accumulate_vec3(&mut self, q: Quantity, values: &[Vec3]) -> Result<()> {
        self.accumulate(q, values.as_flattened())
    }

    pub fn get(&self, q: Quantity) -> Option<&[f64]> {
        self.slots.get(&q).map(Vec::as_slice)
    }

    pub fn get_vec3(&self, q: Quantity) -> Option<Vec<Vec3>> {
        self.get(q)
            .map(|v| v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    /// Number of accumulations into `q`.
    pub fn accumulations(&self, q: Quantity) -> usize {
        self.counts.get(&q).copied().unwrap_or(0)
    }

    pub fn quantities(&self) -> impl Iterator<Item = Quantity> + '_ {
        self.slots.keys().copied()
    }
}

/// Result of a forward pass: the output plus whatever the backward pass
/// needs to avoid recomputation.
pub struct Forward {
    pub output: Vec<f64>,
    pub residual: Box<dyn Any + Send + Sync>,
}

impl Forward {
    pub fn new(output: Vec<f64>, residual: impl Any + Send + Sync) -> Self {
        Self {
            output,
            residual: Box::new(residual),
        }
    }

    pub fn without_residual(output: Vec<f64>) -> Self {
        Self::new(output, ())
    }

    pub fn residual<T: 'static>(&self) -> Result<&T> {
        self.residual
            .downcast_ref::<T>()
            .ok_or_else(|| Error::Usage("backward called with a foreign forward residual".into()))
    }
}

/// A forward map on flat buffers with a hand-written vector-Jacobian product.
pub trait DifferentiableOp: Send + Sync {
    fn name(&self) -> &str;

    /// Expected input length, when fixed.
    fn input_len(&self) -> Option<usize> {
        None
    }

    /// Produced output length, when fixed.
    fn output_len(&self) -> Option<usize> {
        None
    }

    fn forward(&self, input: &[f64]) -> Result<Forward>;

    /// Maps an output cotangent to an input cotangent.
    fn backward(&self, input: &[f64], fwd: &Forward, cotangent: &[f64]) -> Result<Vec<f64>>;

    /// Discrete choices made by the forward pass (fragment slots, nearest
    /// neighbor assignments). Backward treats these as constants; finite
    /// differences are only meaningful where they do not change.
    fn membership(&self, _input: &[f64]) -> Result<Option<Vec<i64>>> {
        Ok(None)
    }
}

/// Sequential chain of ops: forward left to right, backward right to left.
pub struct Compose {
    name: String,
    ops: Vec<Box<dyn DifferentiableOp>>,
}

struct ChainResidual {
    stages: Vec<(Vec<f64>, Forward)>,
}

impl Compose {
    pub fn new(ops: Vec<Box<dyn DifferentiableOp>>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Usage("compose needs at least one op".into()));
        }
        for pair in ops.windows(2) {
            if let (Some(out), Some(inp)) = (pair[0].output_len(), pair[1].input_len()) {
                if out != inp {
                    return Err(Error::shape(format!(
                        "{} produces {out} values but {} expects {inp}",
                        pair[0].name(),
                        pair[1].name()
                    )));
                }
            }
        }
        let name = ops
            .iter()
            .map(|o| o.name())
            .collect::<Vec<_>>()
            .join(" -> ");
        Ok(Self { name, ops })
    }
}

impl DifferentiableOp for Compose {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_len(&self) -> Option<usize> {
        self.ops[0].input_len()
    }

    fn output_len(&self) -> Option<usize> {
        self.ops[self.ops.len() - 1].output_len()
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        let mut stages = Vec::with_capacity(self.ops.len());
        let mut x = input.to_vec();
        for op in &self.ops {
            let f = op.forward(&x)?;
            let next = f.output.clone();
            stages.push((x, f));
            x = next;
        }
        Ok(Forward::new(x, ChainResidual { stages }))
    }

    fn backward(&self, _input: &[f64], fwd: &Forward, cotangent: &[f64]) -> Result<Vec<f64>> {
        let res = fwd.residual::<ChainResidual>()?;
        let mut g = cotangent.to_vec();
        for (op, (x, f)) in self.ops.iter().zip(&res.stages).rev() {
            g = op.backward(x, f, &g)?;
        }
        Ok(g)
    }

    fn membership(&self, input: &[f64]) -> Result<Option<Vec<i64>>> {
        let mut all: Option<Vec<i64>> = None;
        let mut x = input.to_vec();
        for op in &self.ops {
            if let Some(m) = op.membership(&x)? {
                all.get_or_insert_with(Vec::new).extend(m);
            }
            x = op.forward(&x)?.output;
        }
        Ok(all)
    }
}

/// The identity map, mostly useful in tests of composition.
pub struct Identity;

impl DifferentiableOp for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        Ok(Forward::without_residual(input.to_vec()))
    }

    fn backward(&self, _input: &[f64], _fwd: &Forward, cotangent: &[f64]) -> Result<Vec<f64>> {
        Ok(cotangent.to_vec())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FdOptions {
    /// Base step; the actual step is `eps * max(1, max|x|)`.
    pub eps: f64,
    /// Number of random directions to accept.
    pub directions: usize,
    /// Floor on the denominator of the relative error.
    pub abs_floor: f64,
    pub seed: u64,
    /// Directions drawn in total before giving up on finding stable ones.
    pub max_attempts: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            directions: 8,
            abs_floor: 1e-8,
            seed: 0,
            max_attempts: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub op: String,
    pub max_rel_error: f64,
    /// Directions compared.
    pub directions: usize,
    /// Directions discarded because slot or assignment membership changed.
    pub unstable: usize,
}

/// Compares vjp-derived directional derivatives with central differences.
///
/// For a random unit direction `d` in input space and a random output
/// projection `u`, the analytic value is `backward(u) · d` and the numeric
/// value is `(u·f(x+hd) − u·f(x−hd)) / 2h`. Directions along which the op's
/// [`membership`](DifferentiableOp::membership) changes are discarded.
pub fn fd_check(op: &dyn DifferentiableOp, input: &[f64], opts: FdOptions) -> Result<FdReport> {
    let base = op.forward(input)?;
    if base.output.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("forward of {}", op.name())));
    }
    let base_membership = op.membership(input)?;
    let scale = input.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let h = opts.eps * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut max_rel_error = 0.0f64;
    let mut directions = 0;
    let mut unstable = 0;
    let mut attempts = 0;
    while directions < opts.directions && attempts < opts.max_attempts {
        let batch = (opts.directions - directions).min(opts.max_attempts - attempts);
        attempts += batch;
        let candidates: Vec<(Vec<f64>, Vec<f64>)> = (0..batch)
            .map(|_| {
                let d = random_unit(&mut rng, input.len());
                let u = random_unit(&mut rng, base.output.len());
                (d, u)
            })
            .collect();
        let outcomes: Vec<Result<Option<f64>>> = candidates
            .par_iter()
            .map(|(d, u)| {
                directional_error(op, input, &base, base_membership.as_ref(), h, d, u, opts)
            })
            .collect();
        for o in outcomes {
            match o? {
                Some(e) => {
                    max_rel_error = max_rel_error.max(e);
                    directions += 1;
                }
                None => unstable += 1,
            }
        }
    }
    if directions == 0 {
        return Err(Error::Usage(format!(
            "{}: no direction kept slot membership stable",
            op.name()
        )));
    }
    Ok(FdReport {
        op: op.name().to_string(),
        max_rel_error,
        directions,
        unstable,
    })
}

#[allow(clippy::too_many_arguments)]
fn directional_error(
    op: &dyn DifferentiableOp,
    input: &[f64],
    base: &Forward,
    base_membership: Option<&Vec<i64>>,
    h: f64,
    d: &[f64],
    u: &[f64],
    opts: FdOptions,
) -> Result<Option<f64>> {
    let plus: Vec<f64> = input.iter().zip(d).map(|(x, d)| x + h * d).collect();
    let minus: Vec<f64> = input.iter().zip(d).map(|(x, d)| x - h * d).collect();
    if let Some(m) = base_membership {
        if op.membership(&plus)?.as_ref() != Some(m) || op.membership(&minus)?.as_ref() != Some(m) {
            return Ok(None);
        }
    }
    let fp = op.forward(&plus)?.output;
    let fm = op.forward(&minus)?.output;
    if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("forward of {}", op.name())));
    }
    let numeric = fp
        .iter()
        .zip(&fm)
        .zip(u)
        .map(|((p, m), u)| u * (p - m))
        .sum::<f64>()
        / (2.0 * h);
    let g = op.backward(input, base, u)?;
    if g.len() != input.len() {
        return Err(Error::shape(format!(
            "{} backward returned {} values for {} inputs",
            op.name(),
            g.len(),
            input.len()
        )));
    }
    let analytic: f64 = g.iter().zip(d).map(|(g, d)| g * d).sum();
    let denom = analytic.abs().max(numeric.abs()).max(opts.abs_floor);
    Ok(Some((analytic - numeric).abs() / denom))
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 || n == 0 {
            return v.into_iter().map(|x| x / norm.max(1e-300)).collect();
        }
    }
}

/// Adapts a closure pair into a [`DifferentiableOp`].
pub struct FnOp<F, B> {
    name: String,
    forward: F,
    backward: B,
}

impl<F, B> FnOp<F, B>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
    B: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    /// `backward(input, cotangent)` must return the input cotangent.
    pub fn new(name: impl Into<String>, forward: F, backward: B) -> Self {
        Self {
            name: name.into(),
            forward,
            backward,
        }
    }
}

impl<F, B> DifferentiableOp for FnOp<F, B>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
    B: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&self, input: &[f64]) -> Result<Forward> {
        Ok(Forward::without_residual((self.forward)(input)?))
    }

    fn backward(&self, input: &[f64], _fwd: &Forward, cotangent: &[f64]) -> Result<Vec<f64>> {
        (self.backward)(input, cotangent)
    }
}
