//! Conduction transfer functions from a modal state-space model of the wall.
//!
//! Each stack is split into equal nodes per layer. The nodal system
//! `C ẋ = K x + B u` with inputs `u = (T_i, T_in)` is diagonalised through
//! the symmetric form `C^{-1/2} K C^{-1/2}`, reduced by balanced truncation
//! with a static correction that keeps the steady-state gain exact, and each
//! reduced mode is discretised exactly for inputs that follow the quadratic
//! through the last three samples. Recombining the modes over a common denominator gives `X`, `Y`, `Φ`.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::materials::Layer;

/// Upper bound on each coefficient series length.
pub const MAX_CTF_TERMS: usize = 19;
/// Nodes per material layer before order reduction.
pub const NODES_PER_LAYER: usize = 10;
/// Relative truncation threshold for trailing coefficients.
const TRUNCATION: f64 = 1e-10;
/// Hankel singular values below this fraction of the largest are dropped.
const HANKEL_CUTOFF: f64 = 1e-5;
/// Largest reduced order tried.
const MAX_ORDER: usize = 12;
/// Accepted relative mismatch of the steady-state identity before correction.
const DC_TOLERANCE: f64 = 1e-3;

/// `q'' = Σ X_j T_i,t−j − Σ Y_j T_in,t−j + Σ Φ_j q''_t−j`, the flux into the
/// outer face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtfSet {
    /// `X_0..X_nx`, W m⁻² K⁻¹.
    pub x: Vec<f64>,
    /// `Y_0..Y_ny`, W m⁻² K⁻¹.
    pub y: Vec<f64>,
    /// `Φ_1..Φ_nq`.
    pub phi: Vec<f64>,
    /// s
    pub dt: f64,
    /// Stack transmittance, W m⁻² K⁻¹.
    pub u_value: f64,
}

fn unstable(dt: f64, reason: impl Into<String>) -> Error {
    Error::CtfUnstable {
        dt,
        reason: reason.into(),
    }
}

/// Multiplies polynomial `p` (in powers of `z⁻¹`) by `(1 - r z⁻¹)`.
fn mul_root(p: &[f64], r: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (k, c) in p.iter().enumerate() {
        out[k] += c;
        out[k + 1] -= r * c;
    }
    out
}

fn add_into(acc: &mut Vec<f64>, p: &[f64], scale: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, c) in acc.iter_mut().zip(p) {
        *a += scale * c;
    }
}

fn trim(v: &mut Vec<f64>, keep_min: usize) {
    let max = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    while v.len() > keep_min && v.last().is_some_and(|c| c.abs() < TRUNCATION * max) {
        v.pop();
    }
}

/// `∫₀¹ e^{x(1-τ)} τ^p dτ` for `p = 0, 1, 2`.
fn hold_integrals(x: f64) -> [f64; 3] {
    if x.abs() < 1.0 {
        // Σ xⁿ p! / (n+p+1)!
        let mut out = [0.0; 3];
        for (p, o) in out.iter_mut().enumerate() {
            let pf = [1.0, 1.0, 2.0][p];
            let mut term = pf / (1..=p + 1).map(|i| i as f64).product::<f64>();
            for n in 0..40 {
                *o += term;
                term *= x / (n + p + 2) as f64;
            }
        }
        return out;
    }
    let j0 = x.exp_m1() / x;
    let j1 = (j0 - 1.0) / x;
    let j2 = (2.0 * j1 - 1.0) / x;
    [j0, j1, j2]
}

/// Exact discretisation of `ż = λ z + b u` for an input following the
/// quadratic through the last three samples:
/// `z_k = φ z_{k-1} + b (a₀ u_k + a₁ u_{k-1} + a₂ u_{k-2})`.
fn hold_terms(lambda: f64, dt: f64) -> (f64, [f64; 3]) {
    let x = lambda * dt;
    let [i0, i1, i2] = hold_integrals(x).map(|j| j * dt);
    (x.exp(), [(i2 + i1) / 2.0, i0 - i2, (i2 - i1) / 2.0])
}

struct ReducedModel {
    /// Decay factor and input weights per mode.
    poles: Vec<(f64, [f64; 3])>,
    /// Output residue per mode for the outer and inner input.
    residues: Vec<[f64; 2]>,
    /// Direct feedthrough for the two inputs.
    d: [f64; 2],
}

fn psd_factor(w: DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(w);
    let mut l = e.eigenvectors;
    for (j, s) in e.eigenvalues.iter().enumerate() {
        let f = s.max(0.0).sqrt();
        l.column_mut(j).scale_mut(f);
    }
    l
}

/// Unit vector spanning the numerical null space of `m`.
fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (j, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    vt.row(j).transpose()
}

fn reduced_model(dz: &[f64], k: &[f64], cap: &[f64], dt: f64) -> Result<ReducedModel> {
    let n = dz.len();
    let k_out = k[0] / (0.5 * dz[0]);
    let k_in = k[n - 1] / (0.5 * dz[n - 1]);

    // symmetric form M = S⁻¹ K S⁻¹ with S = diag(√C)
    let s: Vec<f64> = cap.iter().map(|c| c.sqrt()).collect();
    let mut kmat = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        let g = 1.0 / (0.5 * dz[i] / k[i] + 0.5 * dz[i + 1] / k[i + 1]);
        kmat[(i, i)] -= g;
        kmat[(i + 1, i + 1)] -= g;
        kmat[(i, i + 1)] += g;
        kmat[(i + 1, i)] += g;
    }
    kmat[(0, 0)] -= k_out;
    kmat[(n - 1, n - 1)] -= k_in;
    let m = DMatrix::from_fn(n, n, |i, j| kmat[(i, j)] / (s[i] * s[j]));
    let eig = SymmetricEigen::new(m);
    let lam = &eig.eigenvalues;
    if lam.iter().any(|l| !(*l < 0.0)) {
        return Err(unstable(dt, "nodal system is not strictly dissipative"));
    }
    // modal inputs and output; q = k_out (T_i - x₁)
    let b = DMatrix::from_fn(n, 2, |j, i| {
        if i == 0 {
            eig.eigenvectors[(0, j)] * k_out / s[0]
        } else {
            eig.eigenvectors[(n - 1, j)] * k_in / s[n - 1]
        }
    });
    let c = DVector::from_fn(n, |j, _| -k_out * eig.eigenvectors[(0, j)] / s[0]);
    let d = [k_out, 0.0];
    let dc = |i: usize| d[i] - (0..n).map(|j| c[j] * b[(j, i)] / lam[j]).sum::<f64>();
    let g0 = [dc(0), dc(1)];

    let wc = DMatrix::from_fn(n, n, |i, j| -(b[(i, 0)] * b[(j, 0)] + b[(i, 1)] * b[(j, 1)]) / (lam[i] + lam[j]));
    let wo = DMatrix::from_fn(n, n, |i, j| -(c[i] * c[j]) / (lam[i] + lam[j]));
    let lc = psd_factor(wc);
    let lo = psd_factor(wo);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let hsv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut r = hsv.iter().take_while(|h| **h > HANKEL_CUTOFF * hsv[0]).count().clamp(1, MAX_ORDER);

    let lam_diag = DMatrix::from_diagonal(lam);
    loop {
        let sr: Vec<f64> = hsv[..r].iter().map(|h| h.sqrt()).collect();
        let tr = DMatrix::from_fn(n, r, |i, j| (0..n).map(|l| lc[(i, l)] * vt[(order[j], l)]).sum::<f64>() / sr[j]);
        let tl = DMatrix::from_fn(r, n, |j, i| (0..n).map(|l| u[(l, order[j])] * lo[(i, l)]).sum::<f64>() / sr[j]);
        let ar = &tl * &lam_diag * &tr;
        let br = &tl * &b;
        let cr = c.transpose() * &tr;
        match modal_split(&ar, &br, &cr) {
            Some(modes) => {
                let mut d_r = g0;
                let mut poles = Vec::with_capacity(r);
                let mut residues = Vec::with_capacity(r);
                for (mu, res) in modes {
                    d_r[0] += res[0] / mu;
                    d_r[1] += res[1] / mu;
                    poles.push(hold_terms(mu, dt));
                    residues.push(res);
                }
                return Ok(ReducedModel { poles, residues, d: d_r });
            }
            None if r > 1 => r -= 1,
            None => return Err(unstable(dt, "model reduction produced no stable real modes")),
        }
    }
}

/// Eigen-decomposes a reduced system into first-order modes `(μ, c·v w·b / w·v)`.
/// Returns `None` unless every eigenvalue is real, negative and simple.
fn modal_split(ar: &DMatrix<f64>, br: &DMatrix<f64>, cr: &nalgebra::RowDVector<f64>) -> Option<Vec<(f64, [f64; 2])>> {
    let r = ar.nrows();
    let ev = ar.clone().schur().complex_eigenvalues();
    let mut mus: Vec<f64> = Vec::with_capacity(r);
    for z in ev.iter() {
        if !(z.re < 0.0) || z.im.abs() > 1e-8 * z.re.abs() {
            return None;
        }
        mus.push(z.re);
    }
    mus.sort_by(f64::total_cmp);
    if mus.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-9 * w[0].abs()) {
        return None;
    }
    let mut out = Vec::with_capacity(r);
    for mu in mus {
        let shifted = ar - DMatrix::identity(r, r) * mu;
        let v = null_vector(&shifted);
        let w = null_vector(&shifted.transpose());
        let wv = w.dot(&v);
        if wv.abs() < 1e-12 {
            return None;
        }
        let cv = (cr * &v)[0];
        let res = [cv * w.dot(&br.column(0)) / wv, cv * w.dot(&br.column(1)) / wv];
        out.push((mu, res));
    }
    Some(out)
}

/// Largest root modulus of `z^n - Φ₁ z^{n-1} - … - Φ_n`.
fn max_root_modulus(phi: &[f64]) -> f64 {
    let n = phi.len();
    if n == 0 {
        return 0.0;
    }
    let comp = DMatrix::from_fn(n, n, |i, j| if i == 0 { phi[j] } else if i == j + 1 { 1.0 } else { 0.0 });
    comp.schur().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn compute_ctf(layers: &[Layer], dt: f64) -> Result<CtfSet> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if layers.is_empty() {
        return Err(Error::InvalidArgument("substrate has no layers".into()));
    }
    let (mut dz, mut k, mut cap) = (Vec::new(), Vec::new(), Vec::new());
    for l in layers {
        if !(l.thickness > 0.0 && l.conductivity > 0.0 && l.density > 0.0 && l.specific_heat > 0.0) {
            return Err(Error::InvalidArgument("layer properties must be positive".into()));
        }
        let d = l.thickness / NODES_PER_LAYER as f64;
        for _ in 0..NODES_PER_LAYER {
            dz.push(d);
            k.push(l.conductivity);
            cap.push(l.density * l.specific_heat * d);
        }
    }
    let u_value = 1.0 / layers.iter().map(Layer::resistance).sum::<f64>();
    let model = reduced_model(&dz, &k, &cap, dt)?;
    let r = model.poles.len();

    let mut den = vec![1.0];
    for &(phi, _) in &model.poles {
        den = mul_root(&den, phi);
    }
    let mut num_x: Vec<f64> = den.iter().map(|c| c * model.d[0]).collect();
    let mut num_y: Vec<f64> = den.iter().map(|c| -c * model.d[1]).collect();
    for j in 0..r {
        let mut rest = vec![1.0];
        for (l, &(phi, _)) in model.poles.iter().enumerate() {
            if l != j {
                rest = mul_root(&rest, phi);
            }
        }
        let (_, a) = model.poles[j];
        let mut term = vec![0.0; rest.len() + 2];
        for (i, c) in rest.iter().enumerate() {
            for (m, w) in a.iter().enumerate() {
                term[i + m] += w * c;
            }
        }
        add_into(&mut num_x, &term, model.residues[j][0]);
        add_into(&mut num_y, &term, -model.residues[j][1]);
    }
    let mut x = num_x;
    let mut y = num_y;
    let mut phi: Vec<f64> = den[1..].iter().map(|c| -c).collect();
    trim(&mut x, 1);
    trim(&mut y, 1);
    trim(&mut phi, 0);
    if x.len() > MAX_CTF_TERMS || y.len() > MAX_CTF_TERMS || phi.len() > MAX_CTF_TERMS {
        return Err(unstable(dt, "more than 19 coefficients required"));
    }

    if max_root_modulus(&phi) >= 1.0 {
        return Err(unstable(dt, "flux history polynomial has a root on or outside the unit circle"));
    }
    let one_minus = 1.0 - phi.iter().sum::<f64>();
    let sx = x.iter().sum::<f64>() / one_minus;
    let sy = y.iter().sum::<f64>() / one_minus;
    let worst = ((sx - u_value) / u_value).abs().max(((sy - u_value) / u_value).abs());
    if !(worst <= DC_TOLERANCE) {
        return Err(unstable(
            dt,
            format!("steady-state identity off by {worst:.2e} relative; use the finite-difference method for this time step"),
        ));
    }
    // absorb the residual in the last term so the identity holds exactly
    let target = u_value * one_minus;
    let lx = x.len() - 1;
    x[lx] += target - x.iter().sum::<f64>();
    let ly = y.len() - 1;
    y[ly] += target - y.iter().sum::<f64>();
    Ok(CtfSet { x, y, phi, dt, u_value })
}

impl CtfSet {
    pub fn steady_state_x(&self) -> f64 {
        self.x.iter().sum::<f64>() / (1.0 - self.phi.iter().sum::<f64>())
    }

    pub fn steady_state_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / (1.0 - self.phi.iter().sum::<f64>())
    }

    pub fn history_len(&self) -> usize {
        self.x.len().max(self.y.len()).max(self.phi.len() + 1)
    }

    /// Writes `cc,X,Y,Φ` rows, blank where a series has ended.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut body = String::from("cc,X,Y,Phi\n");
        let rows = self.x.len().max(self.y.len()).max(self.phi.len() + 1);
        let cell = |v: Option<&f64>| v.map(|c| format!("{c:.12e}")).unwrap_or_default();
        for cc in 0..rows {
            let phi = if cc == 0 { None } else { self.phi.get(cc - 1) };
            body.push_str(&format!("{cc},{},{},{}\n", cell(self.x.get(cc)), cell(self.y.get(cc)), cell(phi)));
        }
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Temperature and flux histories, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfHistory {
    t_i: VecDeque<f64>,
    t_in: VecDeque<f64>,
    q: VecDeque<f64>,
}

impl CtfHistory {
    /// Starts from isothermal equilibrium at `t0`: temperatures equal to
    /// `t0` and zero flux throughout the history.
    pub fn isothermal(set: &CtfSet, t0: f64) -> Self {
        let n = set.history_len();
        Self {
            t_i: VecDeque::from(vec![t0; n]),
            t_in: VecDeque::from(vec![t0; n]),
            q: VecDeque::from(vec![0.0; n]),
        }
    }

    /// Flux part that does not depend on the current `T_i`, so that
    /// `q'' = X₀ T_i + offset`.
    pub fn offset(&self, set: &CtfSet, t_in: f64) -> f64 {
        let mut q = -set.y[0] * t_in;
        for j in 1..set.x.len() {
            q += set.x[j] * self.t_i[j - 1];
        }
        for j in 1..set.y.len() {
            q -= set.y[j] * self.t_in[j - 1];
        }
        for (j, p) in set.phi.iter().enumerate() {
            q += p * self.q[j];
        }
        q
    }

    /// Records the converged step.
    pub fn push(&mut self, t_i: f64, t_in: f64, q: f64) {
        self.t_i.pop_back();
        self.t_i.push_front(t_i);
        self.t_in.pop_back();
        self.t_in.push_front(t_in);
        self.q.pop_back();
        self.q.push_front(q);
    }

    pub fn last_flux(&self) -> f64 {
        self.q[0]
    }
}

/// Evaluates the transfer function for the current temperatures and appends
/// the step to the history.
pub fn ctf_flux(set: &CtfSet, hist: &mut CtfHistory, t_i: f64, t_in: f64) -> f64 {
    let q = set.x[0] * t_i + hist.offset(set, t_in);
    hist.push(t_i, t_in, q);
    q
}
