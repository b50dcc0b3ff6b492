//! Primal-dual minimization of the tensor-weighted second-order TGV energy
//! over scaled inverse depth.
//!
//! The discrete energy is
//!
//! ```text
//! E(u, v) = Σ  λ_d w (u - g)²  +  λ_s ‖G (∇u - v)‖₂  +  λ_a ‖∇v‖_F
//! ```
//!
//! where `g` is the inverse depth scaled so its maximum is one and `G` is the
//! per-pixel diffusion tensor. Iterations alternate projected dual ascent on
//! `p` (for the first-order term) and `q` (for the second-order term) with
//! primal descent on `u` and `v`, followed by over-relaxation.
//!
//! Dual and auxiliary fields are stored interleaved per pixel; [`Solver::state`]
//! unpacks them into grid fields.

use rayon::prelude::*;

use crate::badt::TensorField;
use crate::error::{Error, Result};
use crate::grid::{dx_forward, dy_forward, JacobianField, ScalarField, VectorField};

/// Lower bound on scaled inverse depth before converting back to meters.
pub const MIN_INVERSE_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub lambda_s: f64,
    pub lambda_a: f64,
    pub lambda_d: f64,
    pub tau_p: f64,
    pub tau_q: f64,
    pub tau_u: f64,
    pub tau_v: f64,
    pub iterations: usize,
    /// Data weight is `w = d̄^weight_exponent`.
    pub weight_exponent: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda_s: 0.2,
            lambda_a: 1.6,
            lambda_d: 0.2,
            tau_p: 1.0 / 8f64.sqrt(),
            tau_q: 1.0 / 8f64.sqrt(),
            tau_u: 1.0 / 12f64.sqrt(),
            tau_v: 1.0 / 12f64.sqrt(),
            iterations: 200,
            weight_exponent: 1.0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_s, self.lambda_a, self.lambda_d];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "term weights must be finite and non-negative, got {lambdas:?}"
            )));
        }
        let taus = [self.tau_p, self.tau_q, self.tau_u, self.tau_v];
        if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "step sizes must be positive, got {taus:?}"
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be >= 1".into()));
        }
        if !self.weight_exponent.is_finite() {
            return Err(Error::InvalidInput("weight exponent must be finite".into()));
        }
        Ok(())
    }
}

/// Scaled inverse depth `g`, data weight `w`, and the scale that was divided out.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTerm {
    pub g: ScalarField,
    pub w: ScalarField,
    /// Maximum inverse depth before normalization; `g = d⁻¹ / scale`.
    pub scale: f64,
}

impl DataTerm {
    pub fn dims(&self) -> (usize, usize) {
        self.g.dims()
    }
}

/// Dense data term from the piecewise-constant depth map.
pub fn prepare_data(dbar: &ScalarField, weight_exponent: f64) -> Result<DataTerm> {
    dbar.require_fully_valid("piecewise-constant depth")?;
    check_positive(dbar)?;
    let scale = dbar
        .values()
        .iter()
        .map(|d| 1.0 / d)
        .fold(f64::MIN, f64::max);
    let g = dbar.map(|d| (1.0 / d) / scale);
    let w = dbar.map(|d| d.powf(weight_exponent));
    Ok(DataTerm { g, w, scale })
}

/// Sparse data term: `g` and `w` are zero wherever `depth` has no measurement.
///
/// `scale` defaults to the maximum measured inverse depth.
pub fn prepare_sparse_data(
    depth: &ScalarField,
    weight_exponent: f64,
    scale: Option<f64>,
) -> Result<DataTerm> {
    check_positive(depth)?;
    if depth.valid_count() == 0 {
        return Err(Error::NoSeeds);
    }
    let scale = match scale {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::InvalidInput(format!(
                "inverse-depth scale must be positive, got {s}"
            )))
        }
        None => depth
            .iter_valid()
            .map(|(_, _, d)| 1.0 / d)
            .fold(f64::MIN, f64::max),
    };
    let (w, h) = depth.dims();
    let mut g = ScalarField::zeros(w, h);
    let mut wt = ScalarField::zeros(w, h);
    for (x, y, d) in depth.iter_valid() {
        g.set(x, y, (1.0 / d) / scale);
        wt.set(x, y, d.powf(weight_exponent));
    }
    Ok(DataTerm { g, w: wt, scale })
}

fn check_positive(depth: &ScalarField) -> Result<()> {
    match depth.iter_valid().find(|&(_, _, d)| !(d > 0.0)) {
        Some((x, y, value)) => Err(Error::NonPositiveDepth { x, y, value }),
        None => Ok(()),
    }
}

/// Projection onto the Euclidean ball of radius `lambda`.
#[inline]
pub fn prox_p(p: [f64; 2], lambda: f64) -> [f64; 2] {
    if lambda <= 0.0 {
        return [0.0; 2];
    }
    let s = 1.0f64.max(p[0].hypot(p[1]) / lambda);
    [p[0] / s, p[1] / s]
}

#[inline]
pub fn prox_q(q: [f64; 4], lambda: f64) -> [f64; 4] {
    if lambda <= 0.0 {
        return [0.0; 4];
    }
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let s = 1.0f64.max(norm / lambda);
    [q[0] / s, q[1] / s, q[2] / s, q[3] / s]
}

/// Snapshot of all iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: ScalarField,
    pub v: VectorField,
    pub p: VectorField,
    pub q: JacobianField,
    pub u_bar: ScalarField,
    pub v_bar: VectorField,
    pub scale: f64,
}

/// Result of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    /// Dense depth in meters.
    pub depth: ScalarField,
    /// Converged scaled inverse depth.
    pub inverse_depth: ScalarField,
    /// Energy after each iteration, empty unless tracing was requested.
    pub energy_trace: Vec<f64>,
}

/// Iterates the primal-dual scheme one step at a time.
pub struct Solver<'a> {
    data: &'a DataTerm,
    tensor: &'a TensorField,
    params: SolverParams,
    width: usize,
    height: usize,
    u: Vec<f64>,
    u_bar: Vec<f64>,
    v: Vec<[f64; 2]>,
    v_bar: Vec<[f64; 2]>,
    p: Vec<[f64; 2]>,
    q: Vec<[f64; 4]>,
    /// `G p`, reused by the u and v updates.
    gp: Vec<[f64; 2]>,
    iteration: usize,
}

impl<'a> Solver<'a> {
    pub fn new(data: &'a DataTerm, tensor: &'a TensorField, params: SolverParams) -> Result<Self> {
        params.validate()?;
        let dims = data.g.dims();
        data.w.require_dims(dims)?;
        if tensor.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: tensor.dims(),
            });
        }
        data.g.require_fully_valid("inverse depth")?;
        data.w.require_fully_valid("data weight")?;
        if !(data.scale > 0.0 && data.scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "inverse-depth scale must be positive, got {}",
                data.scale
            )));
        }
        let n = dims.0 * dims.1;
        let u = data.g.values().to_vec();
        Ok(Self {
            data,
            tensor,
            params,
            width: dims.0,
            height: dims.1,
            u_bar: u.clone(),
            u,
            v: vec![[0.0; 2]; n],
            v_bar: vec![[0.0; 2]; n],
            p: vec![[0.0; 2]; n],
            q: vec![[0.0; 4]; n],
            gp: vec![[0.0; 2]; n],
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// One full iteration: dual ascent on p and q, primal descent on u and v,
    /// then over-relaxation.
    pub fn step(&mut self) -> Result<()> {
        let (w, h) = (self.width, self.height);
        let prm = self.params;
        let tensor = self.tensor;

        {
            let (u_bar, v_bar) = (&self.u_bar, &self.v_bar);
            self.p
                .par_chunks_mut(w)
                .zip(self.gp.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (p_row, gp_row))| {
                    for x in 0..w {
                        let i = y * w + x;
                        let r = [
                            dx_forward(u_bar, w, x, i) - v_bar[i][0],
                            dy_forward(u_bar, w, h, y, i) - v_bar[i][1],
                        ];
                        let gr = tensor.apply(i, r);
                        let p = prox_p(
                            [
                                p_row[x][0] + prm.tau_p * gr[0],
                                p_row[x][1] + prm.tau_p * gr[1],
                            ],
                            prm.lambda_s,
                        );
                        p_row[x] = p;
                        gp_row[x] = tensor.apply(i, p);
                    }
                });
        }

        {
            let v_bar = &self.v_bar;
            self.q.par_chunks_mut(w).enumerate().for_each(|(y, q_row)| {
                for (x, q) in q_row.iter_mut().enumerate() {
                    let i = y * w + x;
                    let jac = jacobian_at(v_bar, w, h, x, y, i);
                    *q = prox_q(
                        [
                            q[0] + prm.tau_q * jac[0],
                            q[1] + prm.tau_q * jac[1],
                            q[2] + prm.tau_q * jac[2],
                            q[3] + prm.tau_q * jac[3],
                        ],
                        prm.lambda_a,
                    );
                }
            });
        }

        {
            let gp = &self.gp;
            let g = self.data.g.values();
            let wt = self.data.w.values();
            self.u
                .par_chunks_mut(w)
                .zip(self.u_bar.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (u_row, ub_row))| {
                    for x in 0..w {
                        let i = y * w + x;
                        let div = div2(gp, w, h, x, y, i);
                        let a = prm.tau_u * prm.lambda_d * wt[i];
                        let old = u_row[x];
                        let new = (old + prm.tau_u * div + a * g[i]) / (1.0 + a);
                        u_row[x] = new;
                        ub_row[x] = 2.0 * new - old;
                    }
                });
        }

        {
            let (gp, q) = (&self.gp, &self.q);
            self.v
                .par_chunks_mut(w)
                .zip(self.v_bar.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (v_row, vb_row))| {
                    for x in 0..w {
                        let i = y * w + x;
                        let dq = div_jacobian(q, w, h, x, y, i);
                        let old = v_row[x];
                        let new = [
                            old[0] + prm.tau_v * (gp[i][0] + dq[0]),
                            old[1] + prm.tau_v * (gp[i][1] + dq[1]),
                        ];
                        v_row[x] = new;
                        vb_row[x] = [2.0 * new[0] - old[0], 2.0 * new[1] - old[1]];
                    }
                });
        }

        self.iteration += 1;
        if !self.u.par_iter().all(|u| u.is_finite()) {
            return Err(Error::NonFinite {
                variable: "u",
                iteration: self.iteration,
            });
        }
        if !self
            .v
            .par_iter()
            .all(|v| v[0].is_finite() && v[1].is_finite())
        {
            return Err(Error::NonFinite {
                variable: "v",
                iteration: self.iteration,
            });
        }
        Ok(())
    }

    /// Energy of the current `(u, v)`.
    pub fn energy(&self) -> f64 {
        energy_raw(
            self.width,
            self.height,
            &self.u,
            &self.v,
            self.data.g.values(),
            self.data.w.values(),
            self.tensor,
            self.params.lambda_s,
            self.params.lambda_a,
            self.params.lambda_d,
        )
    }

    /// Largest pointwise `‖p‖` and `‖q‖`.
    pub fn max_dual_norms(&self) -> (f64, f64) {
        let p = self.p.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        let q = self
            .q
            .iter()
            .map(|q| (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt())
            .fold(0.0, f64::max);
        (p, q)
    }

    pub fn inverse_depth(&self) -> ScalarField {
        ScalarField::from_vec(self.width, self.height, self.u.clone()).expect("finite iterate")
    }

    /// Current depth in meters; inverse depth is clamped below at
    /// [`MIN_INVERSE_DEPTH`] before inversion.
    pub fn depth(&self) -> ScalarField {
        let scale = self.data.scale;
        let d = self
            .u
            .iter()
            .map(|&u| 1.0 / (u.max(MIN_INVERSE_DEPTH) * scale))
            .collect();
        ScalarField::from_vec(self.width, self.height, d).expect("finite depth")
    }

    pub fn state(&self) -> SolverState {
        let (w, h) = (self.width, self.height);
        let scalar = |v: &[f64]| ScalarField::from_vec(w, h, v.to_vec()).expect("finite iterate");
        let vector = |v: &[[f64; 2]]| VectorField {
            x: scalar(&v.iter().map(|a| a[0]).collect::<Vec<_>>()),
            y: scalar(&v.iter().map(|a| a[1]).collect::<Vec<_>>()),
        };
        let chan = |k: usize| scalar(&self.q.iter().map(|a| a[k]).collect::<Vec<_>>());
        SolverState {
            u: scalar(&self.u),
            v: vector(&self.v),
            p: vector(&self.p),
            q: JacobianField {
                xx: chan(0),
                xy: chan(1),
                yx: chan(2),
                yy: chan(3),
            },
            u_bar: scalar(&self.u_bar),
            v_bar: vector(&self.v_bar),
            scale: self.data.scale,
        }
    }
}

/// Runs `params.iterations` steps from `u = g, v = p = q = 0`.
pub fn minimize(
    data: &DataTerm,
    tensor: &TensorField,
    params: &SolverParams,
    trace: bool,
) -> Result<Completion> {
    let mut solver = Solver::new(data, tensor, *params)?;
    let mut energy_trace = Vec::with_capacity(if trace { params.iterations } else { 0 });
    for _ in 0..params.iterations {
        solver.step()?;
        if trace {
            energy_trace.push(solver.energy());
        }
    }
    Ok(Completion {
        depth: solver.depth(),
        inverse_depth: solver.inverse_depth(),
        energy_trace,
    })
}

/// Discrete energy of `(u, v)`; see the module docs.
#[allow(clippy::too_many_arguments)]
pub fn energy(
    u: &ScalarField,
    v: &VectorField,
    g: &ScalarField,
    w: &ScalarField,
    tensor: &TensorField,
    lambda_s: f64,
    lambda_a: f64,
    lambda_d: f64,
) -> Result<f64> {
    let dims = u.dims();
    for f in [&v.x, &v.y, g, w] {
        f.require_dims(dims)?;
    }
    if tensor.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: tensor.dims(),
        });
    }
    u.require_fully_valid("u")?;
    g.require_fully_valid("g")?;
    w.require_fully_valid("w")?;
    let vv: Vec<[f64; 2]> = (0..u.len()).map(|i| v.at(i)).collect();
    Ok(energy_raw(
        dims.0,
        dims.1,
        u.values(),
        &vv,
        g.values(),
        w.values(),
        tensor,
        lambda_s,
        lambda_a,
        lambda_d,
    ))
}

#[allow(clippy::too_many_arguments)]
fn energy_raw(
    w: usize,
    h: usize,
    u: &[f64],
    v: &[[f64; 2]],
    g: &[f64],
    wt: &[f64],
    tensor: &TensorField,
    lambda_s: f64,
    lambda_a: f64,
    lambda_d: f64,
) -> f64 {
    // per-row partial sums added in row order keep the total reproducible
    let rows: Vec<f64> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut acc = 0.0;
            for x in 0..w {
                let i = y * w + x;
                let r = [
                    dx_forward(u, w, x, i) - v[i][0],
                    dy_forward(u, w, h, y, i) - v[i][1],
                ];
                let gr = tensor.apply(i, r);
                let jac = jacobian_at(v, w, h, x, y, i);
                let diff = u[i] - g[i];
                acc += lambda_d * wt[i] * diff * diff
                    + lambda_s * gr[0].hypot(gr[1])
                    + lambda_a
                        * (jac[0] * jac[0] + jac[1] * jac[1] + jac[2] * jac[2] + jac[3] * jac[3])
                            .sqrt();
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

#[inline]
fn jacobian_at(v: &[[f64; 2]], w: usize, h: usize, x: usize, y: usize, i: usize) -> [f64; 4] {
    let (mut dxx, mut dxy, mut dyx, mut dyy) = (0.0, 0.0, 0.0, 0.0);
    if x + 1 < w {
        dxx = v[i + 1][0] - v[i][0];
        dyx = v[i + 1][1] - v[i][1];
    }
    if y + 1 < h {
        dxy = v[i + w][0] - v[i][0];
        dyy = v[i + w][1] - v[i][1];
    }
    [dxx, dxy, dyx, dyy]
}

/// Backward-difference divergence of an interleaved 2-vector field.
#[inline]
fn div2(p: &[[f64; 2]], w: usize, h: usize, x: usize, y: usize, i: usize) -> f64 {
    let mut d = 0.0;
    if x + 1 < w {
        d += p[i][0];
    }
    if x > 0 {
        d -= p[i - 1][0];
    }
    if y + 1 < h {
        d += p[i][1];
    }
    if y > 0 {
        d -= p[i - w][1];
    }
    d
}

/// Row-wise divergence of an interleaved Jacobian field, the negative adjoint
/// of [`jacobian_at`].
#[inline]
fn div_jacobian(q: &[[f64; 4]], w: usize, h: usize, x: usize, y: usize, i: usize) -> [f64; 2] {
    let mut d = [0.0; 2];
    if x + 1 < w {
        d[0] += q[i][0];
        d[1] += q[i][2];
    }
    if x > 0 {
        d[0] -= q[i - 1][0];
        d[1] -= q[i - 1][2];
    }
    if y + 1 < h {
        d[0] += q[i][1];
        d[1] += q[i][3];
    }
    if y > 0 {
        d[0] -= q[i - w][1];
        d[1] -= q[i - w][3];
    }
    d
}

/// Summary statistics over the tail of an energy trace.
pub mod trace {
    /// Population standard deviation of the last `n` entries.
    pub fn tail_std(trace: &[f64], n: usize) -> f64 {
        let tail = &trace[trace.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        (tail.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / tail.len() as f64).sqrt()
    }

    /// `|E_final - mean(last n)| / |E_final|`.
    pub fn tail_relative_change(trace: &[f64], n: usize) -> f64 {
        let Some(&last) = trace.last() else {
            return 0.0;
        };
        let tail = &trace[trace.len().saturating_sub(n)..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        (last - mean).abs() / last.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::badt::{build_badt, BadtCase};
    use crate::boundary::BoundaryMask;
    use crate::grid::{divergence, forward_gradient, Mask};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> f64) -> ScalarField {
        ScalarField::from_vec(w, h, (0..w * h).map(|i| f(i % w, i / w)).collect()).unwrap()
    }

    #[test]
    fn prepare_constant() {
        let data = prepare_data(&ScalarField::filled(4, 3, 10.0), 1.0).unwrap();
        assert!(data.g.values().iter().all(|&g| g == 1.0));
        assert!(data.w.values().iter().all(|&w| w == 10.0));
        assert!((data.scale - 0.1).abs() < 1e-15);
    }

    #[test]
    fn prepare_two_depths_and_exponent() {
        let d = field(2, 1, |x, _| if x == 0 { 5.0 } else { 20.0 });
        let data = prepare_data(&d, 1.0).unwrap();
        assert!((data.scale - 0.2).abs() < 1e-15);
        assert_eq!(data.g.get(0, 0), Some(1.0));
        assert!((data.g.get(1, 0).unwrap() - 0.25).abs() < 1e-15);
        let data = prepare_data(&ScalarField::filled(1, 1, 4.0), 2.5).unwrap();
        assert!((data.w.get(0, 0).unwrap() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn prepare_rejects_bad_depth() {
        let d = field(2, 1, |x, _| x as f64);
        assert!(matches!(
            prepare_data(&d, 1.0),
            Err(Error::NonPositiveDepth { x: 0, .. })
        ));
        assert!(prepare_data(&ScalarField::empty(2, 2), 1.0).is_err());
    }

    #[test]
    fn sparse_data_is_zero_off_samples() {
        let mut d = ScalarField::empty(3, 1);
        d.set(1, 0, 8.0);
        let data = prepare_sparse_data(&d, 1.0, None).unwrap();
        assert_eq!(data.g.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(data.w.values(), &[0.0, 8.0, 0.0]);
        assert!((data.scale - 0.125).abs() < 1e-15);
    }

    #[test]
    fn prox_examples() {
        assert_eq!(prox_p([0.1, 0.0], 0.2), [0.1, 0.0]);
        assert_eq!(prox_p([0.4, 0.0], 0.2), [0.2, 0.0]);
        assert_eq!(prox_q([0.0; 4], 1.6), [0.0; 4]);
        let q = prox_q([3.0, 4.0, 0.0, 0.0], 1.0);
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.8).abs() < 1e-15);
        assert_eq!(prox_p([5.0, 1.0], 0.0), [0.0, 0.0]);
    }

    #[test]
    fn interleaved_operators_are_adjoint() {
        let (w, h) = (7, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<[f64; 2]> = (0..w * h).map(|_| [rng.gen(), rng.gen()]).collect();
        let q: Vec<[f64; 4]> = (0..w * h)
            .map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()])
            .collect();
        let p: Vec<[f64; 2]> = (0..w * h).map(|_| [rng.gen(), rng.gen()]).collect();
        let f: Vec<f64> = (0..w * h).map(|_| rng.gen()).collect();
        let (mut lhs, mut rhs, mut lhs2, mut rhs2) = (0.0, 0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let j = jacobian_at(&v, w, h, x, y, i);
                lhs += (0..4).map(|k| j[k] * q[i][k]).sum::<f64>();
                let d = div_jacobian(&q, w, h, x, y, i);
                rhs += v[i][0] * d[0] + v[i][1] * d[1];
                lhs2 += dx_forward(&f, w, x, i) * p[i][0] + dy_forward(&f, w, h, y, i) * p[i][1];
                rhs2 += f[i] * div2(&p, w, h, x, y, i);
            }
        }
        assert!((lhs + rhs).abs() < 1e-12);
        assert!((lhs2 + rhs2).abs() < 1e-12);

        // div2 agrees with the grid divergence
        let pv = VectorField::new(
            ScalarField::from_vec(w, h, p.iter().map(|a| a[0]).collect()).unwrap(),
            ScalarField::from_vec(w, h, p.iter().map(|a| a[1]).collect()).unwrap(),
        )
        .unwrap();
        let dv = divergence(&pv);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(dv.get(x, y).unwrap(), div2(&p, w, h, x, y, y * w + x));
            }
        }
    }

    #[test]
    fn no_regularization_converges_to_data() {
        let d = field(12, 9, |x, y| 3.0 + ((x * 5 + y * 3) % 7) as f64);
        let data = prepare_data(&d, 1.0).unwrap();
        let tensor = TensorField::identity(12, 9);
        let params = SolverParams {
            lambda_s: 0.0,
            lambda_a: 0.0,
            ..Default::default()
        };
        let out = minimize(&data, &tensor, &params, false).unwrap();
        for (a, b) in out.depth.values().iter().zip(d.values()) {
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn constant_depth_stays_put() {
        let d = ScalarField::filled(10, 8, 7.0);
        let data = prepare_data(&d, 1.0).unwrap();
        let tensor = TensorField::identity(10, 8);
        let mut solver = Solver::new(&data, &tensor, SolverParams::default()).unwrap();
        for _ in 0..30 {
            solver.step().unwrap();
            assert!(solver.state().u.values().iter().all(|&u| u == 1.0));
        }
        assert!(solver
            .depth()
            .values()
            .iter()
            .all(|&d| (d - 7.0).abs() < 1e-12));
    }

    #[test]
    fn energy_examples() {
        let (w, h) = (3, 2);
        let g = ScalarField::filled(w, h, 0.5);
        let wt = ScalarField::filled(w, h, 2.0);
        let tensor = TensorField::identity(w, h);
        let v = VectorField::zeros(w, h);
        assert_eq!(
            energy(&g, &v, &g, &wt, &tensor, 0.2, 1.6, 0.2).unwrap(),
            0.0
        );

        let u = g.map(|x| x + 0.1);
        let e = energy(&u, &v, &g, &wt, &tensor, 0.0, 0.0, 0.2).unwrap();
        assert!((e - 0.2 * 6.0 * 2.0 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn energy_by_hand_on_two_by_two() {
        // u = [[0, 1], [2, 4]], v ≡ (1, 0) except v(1,1) = (0, 3), g ≡ 0, w ≡ 1
        // pixel (0,0) carries a KillX tensor
        let u = ScalarField::from_vec(2, 2, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let v = VectorField::new(
            ScalarField::from_vec(2, 2, vec![1.0, 1.0, 1.0, 0.0]).unwrap(),
            ScalarField::from_vec(2, 2, vec![0.0, 0.0, 0.0, 3.0]).unwrap(),
        )
        .unwrap();
        let g = ScalarField::zeros(2, 2);
        let wt = ScalarField::filled(2, 2, 1.0);
        let mut a = Mask::new(2, 2, false);
        a.set(0, 0, true);
        let tensor = build_badt(&BoundaryMask::new(a, Mask::new(2, 2, false)).unwrap());
        assert_eq!(tensor.cases().unwrap()[0], BadtCase::KillX);
        let (ls, la, ld) = (0.5, 0.25, 2.0);
        // data: ld * (0 + 1 + 4 + 16) = 42
        // first order, r = ∇u - v:
        //   (0,0): ∇u = (1, 2), r = (0, 2), G r = (0, 2) -> 2
        //   (1,0): ∇u = (0, 3), r = (-1, 3) -> sqrt(10)
        //   (0,1): ∇u = (2, 0), r = (1, 0) -> 1
        //   (1,1): ∇u = (0, 0), r = (0, -3) -> 3
        // second order, ∇v (forward, Neumann):
        //   (0,0): dvx/dx 0, dvx/dy 0, dvy/dx 0, dvy/dy 0 -> 0
        //   (1,0): dvx/dy = -1, dvy/dy = 3 -> sqrt(10)
        //   (0,1): dvx/dx = -1, dvy/dx = 3 -> sqrt(10)
        //   (1,1): 0
        let expected = 42.0 + ls * (2.0 + 10f64.sqrt() + 1.0 + 3.0) + la * 2.0 * 10f64.sqrt();
        let e = energy(&u, &v, &g, &wt, &tensor, ls, la, ld).unwrap();
        assert!((e - expected).abs() < 1e-12, "{e} vs {expected}");
    }

    #[test]
    fn zero_tensor_pixels_ignore_first_order_term() {
        let (w, h) = (5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = Mask::new(w, h, false);
        let mut b = Mask::new(w, h, false);
        for (x, y) in [(1, 1), (3, 2), (0, 3)] {
            a.set(x, y, true);
            b.set(x, y, true);
        }
        let zero: Vec<usize> = vec![w + 1, 2 * w + 3, 3 * w];
        let tensor = build_badt(&BoundaryMask::new(a, b).unwrap());
        let g = ScalarField::zeros(w, h);
        let wt = ScalarField::zeros(w, h);
        let v = VectorField::zeros(w, h);
        for _ in 0..5 {
            let u = field(w, h, |_, _| rng.gen_range(-3.0..3.0));
            let grad = forward_gradient(&u);
            let others: f64 = (0..w * h)
                .filter(|i| !zero.contains(i))
                .map(|i| grad.x.values()[i].hypot(grad.y.values()[i]))
                .sum();
            let e = energy(&u, &v, &g, &wt, &tensor, 1.0, 0.0, 0.0).unwrap();
            assert!((e - others).abs() < 1e-12);
        }
    }

    #[test]
    fn duals_stay_feasible() {
        let (w, h) = (16, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = field(w, h, |_, _| rng.gen_range(2.0..40.0));
        let data = prepare_data(&d, 1.0).unwrap();
        let tensor = TensorField::identity(w, h);
        let params = SolverParams::default();
        let mut solver = Solver::new(&data, &tensor, params).unwrap();
        for _ in 0..100 {
            solver.step().unwrap();
            let (p, q) = solver.max_dual_norms();
            assert!(p <= params.lambda_s + 1e-12 && q <= params.lambda_a + 1e-12);
        }
    }

    #[test]
    fn deterministic_output() {
        let (w, h) = (40, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = field(w, h, |_, _| rng.gen_range(2.0..40.0));
        let data = prepare_data(&d, 1.0).unwrap();
        let tensor = TensorField::identity(w, h);
        let params = SolverParams {
            iterations: 50,
            ..Default::default()
        };
        let a = minimize(&data, &tensor, &params, true).unwrap();
        let b = minimize(&data, &tensor, &params, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.energy_trace.len(), 50);
    }

    #[test]
    fn rejects_bad_params() {
        let data = prepare_data(&ScalarField::filled(2, 2, 3.0), 1.0).unwrap();
        let tensor = TensorField::identity(2, 2);
        for params in [
            SolverParams {
                tau_u: 0.0,
                ..Default::default()
            },
            SolverParams {
                iterations: 0,
                ..Default::default()
            },
            SolverParams {
                lambda_s: -1.0,
                ..Default::default()
            },
        ] {
            assert!(Solver::new(&data, &tensor, params).is_err());
        }
        let wrong = TensorField::identity(3, 2);
        assert!(matches!(
            Solver::new(&data, &wrong, SolverParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let d = field(8, 8, |x, y| 2.0 + ((x + 2 * y) % 5) as f64 * 3.0);
        let data = prepare_data(&d, 1.0).unwrap();
        let tensor = TensorField::identity(8, 8);
        // absurd step sizes blow up the iteration
        let params = SolverParams {
            tau_p: 1e200,
            tau_q: 1e200,
            tau_u: 1e200,
            tau_v: 1e200,
            lambda_s: 1e200,
            lambda_a: 1e200,
            iterations: 50,
            ..Default::default()
        };
        match minimize(&data, &tensor, &params, false) {
            Err(Error::NonFinite { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn trace_statistics() {
        let t = [1.0, 2.0, 3.0, 4.0];
        assert!((trace::tail_std(&t, 2) - 0.5).abs() < 1e-15);
        assert!((trace::tail_relative_change(&t, 2) - 0.125).abs() < 1e-15);
    }
}
