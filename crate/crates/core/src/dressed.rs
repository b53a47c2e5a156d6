//! Field-dressed (adiabatic) states, branch tracking, optical potentials and
//! forces.
//!
//! Eigenpairs are stored in *tracked* order: column `k` of a tracked solution
//! is the continuation of column `k` of the previous sample. Ascending order
//! for reporting is available through [`DressedSolution::ascending_order`].

use nalgebra::Schur;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{molecule_frame_fields, FieldProfile};
use crate::hamiltonian::{
    build_extended, d_hamiltonian_dx, CMatrix, ExtendedOptions, FieldAmplitudes, HamiltonianMatrix,
    LevelSystem,
};
use crate::linalg::hermitian_eigen;
use crate::units::HBAR;

/// Relative size below which an eigenvalue counts as the zero (dark) one.
pub const DARK_TOLERANCE: f64 = 1e-10;
/// Relative eigenvalue gap below which two eigenpairs are treated as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-11;
/// Two candidate overlaps closer than this make an assignment ambiguous.
pub const AMBIGUITY_GAP: f64 = 1e-3;

/// Eigen-decomposition of a Hamiltonian at one `(X, t)` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedSolution {
    /// Real parts of the eigenvalues, rad/s.
    pub eigenvalues: Vec<f64>,
    /// Full complex eigenvalues for non-Hermitian input.
    pub complex_eigenvalues: Option<Vec<Complex64>>,
    /// Right eigenvectors as columns.
    pub eigenvectors: CMatrix,
    /// Left eigenvectors as rows, normalised so that `W·V = 1`
    /// (non-Hermitian input only).
    pub left_eigenvectors: Option<CMatrix>,
    pub dark_index: Option<usize>,
    pub position: f64,
    pub time: f64,
    /// Smallest best-match overlap `|⟨v_prev|v⟩|²` found while tracking.
    pub min_overlap: f64,
    /// Largest absolute matrix entry of the Hamiltonian.
    pub scale: f64,
}

impl DressedSolution {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k).iter().cloned().collect()
    }

    /// Permutation listing tracked indices by ascending eigenvalue.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| self.eigenvalues[a].total_cmp(&self.eigenvalues[b]));
        idx
    }

    /// Bare-state reference: identity eigenvectors with the diagonal as
    /// eigenvalues. Tracking the first real sample against this labels every
    /// branch by the bare state it connects to.
    pub fn bare_reference(h: &HamiltonianMatrix) -> Self {
        let n = h.dim();
        DressedSolution {
            eigenvalues: (0..n).map(|i| h.matrix[(i, i)].re).collect(),
            complex_eigenvalues: None,
            eigenvectors: CMatrix::identity(n, n),
            left_eigenvectors: None,
            dark_index: Some(0),
            position: f64::NAN,
            time: f64::NAN,
            min_overlap: 1.0,
            scale: h.scale(),
        }
    }

    pub fn at(mut self, position: f64, time: f64) -> Self {
        self.position = position;
        self.time = time;
        self
    }

    /// Largest `‖H·v − ℰ·v‖` over all pairs.
    pub fn max_residual(&self, h: &HamiltonianMatrix) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let v = self.eigenvectors.column(k);
                let lam = match &self.complex_eigenvalues {
                    Some(c) => c[k],
                    None => Complex64::new(self.eigenvalues[k], 0.0),
                };
                (&h.matrix * v - v * lam).norm()
            })
            .fold(0.0, f64::max)
    }

    fn zero_candidates(&self) -> Vec<usize> {
        let thr = DARK_TOLERANCE * self.scale;
        (0..self.dim())
            .filter(|&k| self.eigenvalues[k].abs() <= thr)
            .collect()
    }

    fn pick_dark(&self, preferred: Option<usize>) -> Option<usize> {
        let cands = self.zero_candidates();
        if let Some(p) = preferred {
            if cands.contains(&p) {
                return Some(p);
            }
        }
        match cands.len() {
            0 => None,
            1 => Some(cands[0]),
            _ => cands.into_iter().max_by(|&a, &b| {
                self.eigenvectors[(0, a)]
                    .norm()
                    .total_cmp(&self.eigenvectors[(0, b)].norm())
            }),
        }
    }
}

/// Diagonalize a Hamiltonian.
///
/// Hermitian input goes through the symmetric eigensolver; otherwise a
/// complex Schur decomposition provides eigenvalues, right eigenvectors by
/// back-substitution and left eigenvectors from the inverse, with a
/// biorthogonality check. Eigenpairs come out in ascending order of the
/// (real part of the) eigenvalue.
pub fn eigensystem(h: &HamiltonianMatrix) -> Result<DressedSolution> {
    let n = h.dim();
    let scale = h.scale();
    if scale == 0.0 {
        return Ok(DressedSolution {
            eigenvalues: vec![0.0; n],
            complex_eigenvalues: None,
            eigenvectors: CMatrix::identity(n, n),
            left_eigenvectors: None,
            dark_index: Some(0),
            position: f64::NAN,
            time: f64::NAN,
            min_overlap: 1.0,
            scale,
        });
    }
    let mut sol = if h.is_hermitian(0.0) {
        hermitian_eigensystem(h, scale)?
    } else {
        general_eigensystem(h, scale)?
    };
    sol.dark_index = sol.pick_dark(None);
    Ok(sol)
}

fn hermitian_eigensystem(h: &HamiltonianMatrix, scale: f64) -> Result<DressedSolution> {
    let n = h.dim();
    let (vals, v) = hermitian_eigen(&h.matrix)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut vecs = CMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let mut col = v.column(k).clone_owned();
        normalize_phase(&mut col);
        vecs.set_column(c, &col);
    }
    Ok(DressedSolution {
        eigenvalues: order.iter().map(|&k| vals[k]).collect(),
        complex_eigenvalues: None,
        eigenvectors: vecs,
        left_eigenvectors: None,
        dark_index: None,
        position: f64::NAN,
        time: f64::NAN,
        min_overlap: 1.0,
        scale,
    })
}

fn general_eigensystem(h: &HamiltonianMatrix, scale: f64) -> Result<DressedSolution> {
    let n = h.dim();
    let schur = Schur::try_new(h.matrix.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!(
            "Schur decomposition did not converge for H = {}",
            h.matrix
        ))
    })?;
    let (q, t) = schur.unpack();
    let lambdas: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let tiny = f64::EPSILON * scale;
    let mut right = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambdas[k];
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            y[i] = -acc / d;
        }
        let yv = nalgebra::DVector::from_vec(y);
        let mut v = &q * yv;
        let nrm = v.norm();
        v /= Complex64::new(nrm, 0.0);
        normalize_phase(&mut v);
        right.set_column(k, &v);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lambdas[a].re.total_cmp(&lambdas[b].re));
    let mut v_sorted = CMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        v_sorted.set_column(c, &right.column(k));
    }
    let left = v_sorted.clone().try_inverse().ok_or_else(|| {
        Error::Numeric(format!(
            "defective Hamiltonian, eigenvectors not invertible: {}",
            h.matrix
        ))
    })?;
    let bi = (&left * &v_sorted - CMatrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if bi > 1e-8 {
        return Err(Error::Numeric(format!(
            "biorthogonality check failed ({bi:e}) for H = {}",
            h.matrix
        )));
    }
    let sorted_l: Vec<Complex64> = order.iter().map(|&k| lambdas[k]).collect();
    Ok(DressedSolution {
        eigenvalues: sorted_l.iter().map(|z| z.re).collect(),
        complex_eigenvalues: Some(sorted_l),
        eigenvectors: v_sorted,
        left_eigenvectors: Some(left),
        dark_index: None,
        position: f64::NAN,
        time: f64::NAN,
        min_overlap: 1.0,
        scale,
    })
}

/// Rotate a vector so its largest component is real and positive.
fn normalize_phase(v: &mut nalgebra::DVector<Complex64>) {
    let (mut best, mut idx) = (0.0, 0);
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    if best > 0.0 {
        let ph = v[idx].conj() / best;
        *v *= ph;
    }
}

/// Analytic Λ dark state `(Ω_c, 0, −Ω_p)/√(Ω_p² + Ω_c²)`.
pub fn dark_state(omega_p: f64, omega_c: f64) -> Result<[f64; 3]> {
    let n = omega_p.hypot(omega_c);
    if n == 0.0 {
        return Err(Error::Domain(
            "dark state undefined when both Rabi frequencies vanish".into(),
        ));
    }
    Ok([omega_c / n, 0.0, -omega_p / n])
}

/// Continue the branches of `previous` into `current`.
///
/// Columns of `current` are permuted to maximise the summed `|⟨v_prev|v⟩|²`
/// and re-phased so each matched overlap is real and positive. Eigenvectors
/// inside a degenerate cluster are first rotated onto the previous vectors.
pub fn track_adiabatic(
    previous: &DressedSolution,
    current: &DressedSolution,
) -> Result<DressedSolution> {
    let n = current.dim();
    if previous.dim() != n {
        return Err(Error::Numeric(format!(
            "dimension mismatch in tracking: {} vs {n}",
            previous.dim()
        )));
    }
    let mut vecs = current.eigenvectors.clone();
    let mut energies = current.eigenvalues.clone();
    align_degenerate(
        &mut vecs,
        &mut energies,
        current.scale.max(previous.scale),
        &previous.eigenvectors,
    );

    // weights |⟨prev_i|cur_j⟩|²
    let ov = previous.eigenvectors.adjoint() * &vecs;
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| ov[(i, j)].norm_sqr()).collect())
        .collect();
    let assign = max_weight_assignment(&w);

    // Branches leaving a degenerate point have no preferred labelling, so
    // ties are only an error for previously isolated branches.
    let tol_prev = DEGENERACY_TOLERANCE * previous.scale.max(current.scale);
    let isolated = |i: usize| {
        (0..n)
            .all(|k| k == i || (previous.eigenvalues[k] - previous.eigenvalues[i]).abs() > tol_prev)
    };
    let mut min_overlap = 1.0f64;
    for i in 0..n {
        let j = assign[i];
        let best = w[i][j];
        min_overlap = min_overlap.min(best);
        let second = (0..n)
            .filter(|&k| k != j)
            .map(|k| w[i][k])
            .fold(0.0, f64::max);
        if best - second < AMBIGUITY_GAP && isolated(i) {
            return Err(Error::StepRefinement(format!(
                "branch {i}: overlaps {best:.6} and {second:.6} are indistinguishable at t = {:e}, X = {:e}",
                current.time, current.position
            )));
        }
    }

    let mut out_vecs = CMatrix::zeros(n, n);
    let mut vals = vec![0.0; n];
    let mut cvals = current
        .complex_eigenvalues
        .as_ref()
        .map(|_| vec![Complex64::new(0.0, 0.0); n]);
    let mut left = current
        .left_eigenvectors
        .as_ref()
        .map(|_| CMatrix::zeros(n, n));
    for i in 0..n {
        let j = assign[i];
        let o = ov[(i, j)];
        let phase = if o.norm() > 0.0 {
            o.conj() / o.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        out_vecs.set_column(i, &(vecs.column(j) * phase));
        vals[i] = energies[j];
        if let (Some(c), Some(src)) = (cvals.as_mut(), current.complex_eigenvalues.as_ref()) {
            c[i] = src[j];
        }
        if let (Some(l), Some(src)) = (left.as_mut(), current.left_eigenvectors.as_ref()) {
            l.set_row(i, &(src.row(j) * phase.conj()));
        }
    }
    let mut out = DressedSolution {
        eigenvalues: vals,
        complex_eigenvalues: cvals,
        eigenvectors: out_vecs,
        left_eigenvectors: left,
        dark_index: None,
        position: current.position,
        time: current.time,
        min_overlap,
        scale: current.scale,
    };
    out.dark_index = out.pick_dark(previous.dark_index);
    Ok(out)
}

/// Rotate eigenvectors within clusters of (near-)degenerate eigenvalues onto
/// the span of the previous vectors that project most strongly into them.
/// Each rotated vector takes its Rayleigh quotient as energy.
fn align_degenerate(vecs: &mut CMatrix, vals: &mut [f64], scale: f64, prev: &CMatrix) {
    let n = vals.len();
    let orig = vals.to_vec();
    let tol = DEGENERACY_TOLERANCE * scale;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| orig[a].total_cmp(&orig[b]));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && orig[order[end]] - orig[order[end - 1]] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let cols: Vec<usize> = order[start..end].to_vec();
            let k = cols.len();
            let basis = CMatrix::from_fn(n, k, |r, c| vecs[(r, cols[c])]);
            // previous vectors ranked by weight inside the cluster subspace
            let proj = basis.adjoint() * prev;
            let mut ranked: Vec<(usize, f64)> =
                (0..n).map(|p| (p, proj.column(p).norm_squared())).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut new_cols: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(k);
            for &(p, _) in &ranked {
                if new_cols.len() == k {
                    break;
                }
                let mut v = &basis * proj.column(p);
                for u in &new_cols {
                    let c = u.dotc(&v);
                    v -= u * c;
                }
                let nrm = v.norm();
                if nrm > 1e-6 {
                    new_cols.push(v / Complex64::new(nrm, 0.0));
                }
            }
            if new_cols.len() == k {
                for (c, v) in cols.iter().zip(new_cols) {
                    let coef = basis.adjoint() * &v;
                    vals[*c] = cols
                        .iter()
                        .enumerate()
                        .map(|(m, &q)| coef[m].norm_sqr() * orig[q])
                        .sum();
                    vecs.set_column(*c, &v);
                }
            }
        }
        start = end;
    }
}

/// Maximum-weight perfect matching on a square weight matrix
/// (Hungarian algorithm with potentials, O(n³)).
fn max_weight_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    let inf = f64::INFINITY;
    // minimise cost = −w, 1-based arrays
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Everything needed to rebuild the Hamiltonian a molecule sees at `(X, t)`.
#[derive(Debug, Clone)]
pub struct DressingContext {
    pub system: LevelSystem,
    pub probe: FieldProfile,
    pub control: FieldProfile,
    pub options: ExtendedOptions,
}

impl DressingContext {
    pub fn amplitudes(&self, x: f64, t: f64) -> FieldAmplitudes {
        let (p, c) = molecule_frame_fields(&self.probe, &self.control, x, t, false)
            .expect("ordering not enforced");
        FieldAmplitudes {
            probe: p,
            control: c,
        }
    }

    /// Hermitian part of the Hamiltonian at `(X, t)`.
    pub fn hamiltonian(&self, x: f64, t: f64) -> Result<HamiltonianMatrix> {
        let h = build_extended(&self.system, self.amplitudes(x, t), self.options, t)?;
        Ok(HamiltonianMatrix {
            matrix: h.hermitian_part(),
        })
    }

    pub fn solve(&self, x: f64, t: f64) -> Result<DressedSolution> {
        Ok(eigensystem(&self.hamiltonian(x, t)?)?.at(x, t))
    }

    /// Track along `times` at fixed `x`, starting from the bare states.
    pub fn track_line(&self, x: f64, times: &[f64]) -> Result<Vec<DressedSolution>> {
        let mut out: Vec<DressedSolution> = Vec::with_capacity(times.len());
        for &t in times {
            let cur = self.solve(x, t)?;
            let tracked = match out.last() {
                Some(prev) => track_adiabatic(prev, &cur)?,
                None => {
                    let bare = DressedSolution::bare_reference(&self.hamiltonian(x, t)?);
                    track_adiabatic(&bare, &cur)?
                }
            };
            out.push(tracked);
        }
        Ok(out)
    }

    /// Hellmann–Feynman force `−ħ⟨ψ|∂H/∂X|ψ⟩` on a normalised state, N.
    pub fn hellmann_feynman_force(&self, x: f64, t: f64, psi: &[Complex64]) -> Result<f64> {
        let amps = self.amplitudes(x, t);
        let slopes = FieldAmplitudes {
            probe: self.probe.log_envelope_slope(x),
            control: self.control.log_envelope_slope(x),
        };
        let d = d_hamiltonian_dx(&self.system, amps, slopes, self.options)?;
        let v = nalgebra::DVector::from_column_slice(psi);
        let e = v.dotc(&(&d * &v)).re;
        Ok(-HBAR * e)
    }
}

/// An energy landscape `ℰ(X, t)` in rad/s that forces can be taken from.
pub trait Landscape: Sync {
    fn energy(&self, x: f64, t: f64) -> Result<f64>;
    /// Finite-difference step, m.
    fn fd_step(&self) -> f64;
    /// Spatial domain `[x_min, x_max]`.
    fn x_range(&self) -> (f64, f64);
}

/// Closure-backed landscape, mostly for tests.
pub struct FnLandscape<F> {
    pub f: F,
    pub step: f64,
    pub range: (f64, f64),
}

impl<F: Fn(f64, f64) -> f64 + Sync> Landscape for FnLandscape<F> {
    fn energy(&self, x: f64, t: f64) -> Result<f64> {
        Ok((self.f)(x, t))
    }
    fn fd_step(&self) -> f64 {
        self.step
    }
    fn x_range(&self) -> (f64, f64) {
        self.range
    }
}

/// Finite-difference stencil used for a force evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Centred differences at h and h/2 with Richardson extrapolation.
    Centred,
    /// Second-order one-sided stencil (evaluation at a domain edge).
    OneSided,
}

/// Classical force `−ħ ∂ℰ/∂X` in newtons.
pub fn force<L: Landscape + ?Sized>(land: &L, x: f64, t: f64) -> Result<f64> {
    force_with_stencil(land, x, t).map(|(f, _)| f)
}

/// Like [`force`], also reporting which stencil was needed.
pub fn force_with_stencil<L: Landscape + ?Sized>(
    land: &L,
    x: f64,
    t: f64,
) -> Result<(f64, Stencil)> {
    let h = land.fd_step();
    let (lo, hi) = land.x_range();
    if x - h >= lo && x + h <= hi {
        let d1 = (land.energy(x + h, t)? - land.energy(x - h, t)?) / (2.0 * h);
        let h2 = 0.5 * h;
        let d2 = (land.energy(x + h2, t)? - land.energy(x - h2, t)?) / (2.0 * h2);
        let d = (4.0 * d2 - d1) / 3.0;
        Ok((-HBAR * d, Stencil::Centred))
    } else {
        let s = if x - h < lo { 1.0 } else { -1.0 };
        let e0 = land.energy(x, t)?;
        let e1 = land.energy(x + s * h, t)?;
        let e2 = land.energy(x + 2.0 * s * h, t)?;
        let d = s * (-3.0 * e0 + 4.0 * e1 - e2) / (2.0 * h);
        Ok((-HBAR * d, Stencil::OneSided))
    }
}

/// Energy of one tracked branch on an `(X, t)` grid.
///
/// Off-grid energies are obtained by diagonalizing at the requested point
/// and picking the eigenpair that best overlaps the branch vector of the
/// nearest grid node. Outside the time grid the fields are taken as off
/// and the branch sits at its bare energy.
#[derive(Debug, Clone)]
pub struct PotentialSurface {
    pub state_index: usize,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `energies[ix][it]`, rad/s.
    pub energies: Vec<Vec<f64>>,
    /// Branch eigenvector at each node, `vectors[ix][it]`.
    pub vectors: Vec<Vec<Vec<Complex64>>>,
    pub context: DressingContext,
    pub step: f64,
    bare_energy: f64,
}

/// Build the surface of the branch connected to bare level `state_index`.
///
/// X-lines are independent and evaluated in parallel; tracking along each
/// line is sequential in time.
pub fn potential_surface(
    context: &DressingContext,
    state_index: usize,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<PotentialSurface> {
    if x_grid.len() < 2 || t_grid.len() < 2 {
        return Err(Error::Config(
            "potential surface grids need at least two points".into(),
        ));
    }
    if !x_grid.windows(2).all(|w| w[0] < w[1]) || !t_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config(
            "potential surface grids must be strictly increasing".into(),
        ));
    }
    if state_index >= context.system.dim() {
        return Err(Error::Config(format!(
            "state index {state_index} out of range"
        )));
    }
    let lines: Vec<Result<(Vec<f64>, Vec<Vec<Complex64>>)>> = x_grid
        .par_iter()
        .map(|&x| {
            let sols = context.track_line(x, t_grid)?;
            Ok((
                sols.iter().map(|s| s.eigenvalues[state_index]).collect(),
                sols.iter().map(|s| s.vector(state_index)).collect(),
            ))
        })
        .collect();
    let mut energies = Vec::with_capacity(x_grid.len());
    let mut vectors = Vec::with_capacity(x_grid.len());
    for l in lines {
        let (e, v) = l?;
        energies.push(e);
        vectors.push(v);
    }
    let dx_min = x_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let w0 = context.probe.waist.min(context.control.waist);
    let step = (w0 / 200.0).min(dx_min / 4.0);
    let bare_energy = context.system.levels[state_index].detuning;
    Ok(PotentialSurface {
        state_index,
        x_grid: x_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        energies,
        vectors,
        context: context.clone(),
        step,
        bare_energy,
    })
}

fn nearest(grid: &[f64], v: f64) -> usize {
    let i = grid.partition_point(|&g| g < v);
    if i == 0 {
        0
    } else if i >= grid.len() {
        grid.len() - 1
    } else if v - grid[i - 1] <= grid[i] - v {
        i - 1
    } else {
        i
    }
}

impl PotentialSurface {
    fn in_time_window(&self, t: f64) -> bool {
        t >= self.t_grid[0] && t <= *self.t_grid.last().unwrap()
    }

    /// Branch eigenpair at an arbitrary point.
    pub fn branch_at(&self, x: f64, t: f64) -> Result<(f64, Vec<Complex64>)> {
        let ix = nearest(&self.x_grid, x);
        let it = nearest(&self.t_grid, t);
        let reference = &self.vectors[ix][it];
        let sol = self.context.solve(x, t)?;
        let n = sol.dim();
        let mut best = (0usize, -1.0f64);
        let mut second = -1.0f64;
        for k in 0..n {
            let o: Complex64 = (0..n)
                .map(|r| reference[r].conj() * sol.eigenvectors[(r, k)])
                .sum();
            let w = o.norm_sqr();
            if w > best.1 {
                second = best.1;
                best = (k, w);
            } else if w > second {
                second = w;
            }
        }
        // A tie can only come from a near-degenerate pair; their energies
        // agree to within the degeneracy tolerance, so either choice is fine
        // unless the energies differ.
        if best.1 - second < AMBIGUITY_GAP {
            let e_tie: Vec<f64> = (0..n)
                .filter(|&k| {
                    let o: Complex64 = (0..n)
                        .map(|r| reference[r].conj() * sol.eigenvectors[(r, k)])
                        .sum();
                    o.norm_sqr() >= second - 1e-12
                })
                .map(|k| sol.eigenvalues[k])
                .collect();
            let spread = e_tie.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - e_tie.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > 1e-9 * sol.scale.max(1.0) {
                return Err(Error::StepRefinement(format!(
                    "ambiguous branch at X = {x:e}, t = {t:e}; refine the surface grid"
                )));
            }
        }
        Ok((sol.eigenvalues[best.0], sol.vector(best.0)))
    }

    /// Smallest overlap between branch vectors of X-adjacent nodes.
    pub fn min_neighbour_overlap(&self) -> f64 {
        let mut m = 1.0f64;
        for ix in 1..self.x_grid.len() {
            for it in 0..self.t_grid.len() {
                let a = &self.vectors[ix - 1][it];
                let b = &self.vectors[ix][it];
                let o: Complex64 = a.iter().zip(b).map(|(p, q)| p.conj() * q).sum();
                m = m.min(o.norm_sqr());
            }
        }
        m
    }

    /// Rows `(X, t, ℰ in J, state_index)`.
    pub fn samples(&self) -> Vec<(f64, f64, f64, usize)> {
        let mut v = Vec::with_capacity(self.x_grid.len() * self.t_grid.len());
        for (ix, &x) in self.x_grid.iter().enumerate() {
            for (it, &t) in self.t_grid.iter().enumerate() {
                v.push((x, t, HBAR * self.energies[ix][it], self.state_index));
            }
        }
        v
    }

    /// Deepest excursion of the branch from its bare energy, rad/s (signed).
    pub fn extremum_shift(&self) -> f64 {
        let mut best = 0.0f64;
        for row in &self.energies {
            for &e in row {
                let d = e - self.bare_energy;
                if d.abs() > best.abs() {
                    best = d;
                }
            }
        }
        best
    }

    /// Forces at every interior grid node, N.
    pub fn grid_forces(&self) -> Result<Vec<Vec<f64>>> {
        let nx = self.x_grid.len();
        (1..nx - 1)
            .into_par_iter()
            .map(|ix| {
                self.t_grid
                    .iter()
                    .map(|&t| force(self, self.x_grid[ix], t))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    }
}

impl Landscape for PotentialSurface {
    fn energy(&self, x: f64, t: f64) -> Result<f64> {
        if !self.in_time_window(t) {
            return Ok(self.bare_energy);
        }
        Ok(self.branch_at(x, t)?.0)
    }

    fn fd_step(&self) -> f64 {
        self.step
    }

    fn x_range(&self) -> (f64, f64) {
        (self.x_grid[0], *self.x_grid.last().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldRole;
    use crate::hamiltonian::build_lambda;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lam(dp: f64, d2: f64, op: f64, oc: f64) -> HamiltonianMatrix {
        build_lambda(&LevelSystem::lambda(dp, d2, 1.0, 1.0), op, oc).unwrap()
    }

    /// Real roots of the monic cubic x³ + a x² + b x + c (three real roots
    /// assumed), trigonometric method.
    fn cubic_roots(a: f64, b: f64, c: f64) -> [f64; 3] {
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let m = 2.0 * (-p / 3.0).sqrt();
        let th = (3.0 * q / (p * m)).acos() / 3.0;
        let mut r = [0.0; 3];
        for k in 0..3 {
            r[k] = m * (th - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - a / 3.0;
        }
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        r
    }

    #[test]
    fn equal_rabi_resonant_spectrum() {
        for om in [0.3, 1.0, 7.5] {
            let s = eigensystem(&lam(0.0, 0.0, om, om)).unwrap();
            let want = [-(2f64.sqrt()) * om, 0.0, 2f64.sqrt() * om];
            for (a, b) in s.eigenvalues.iter().zip(want) {
                assert!((a - b).abs() < 1e-12 * om);
            }
            assert_eq!(s.dark_index, Some(1));
        }
    }

    #[test]
    fn spectrum_matches_characteristic_polynomial() {
        // det(λ − H) for the real symmetric Λ matrix
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (dp, d2, op, oc) = (
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..3.0),
            );
            // λ³ − (dp+d2)λ² + (dp d2 − op² − oc²)λ + op² d2 = 0
            let r = cubic_roots(-(dp + d2), dp * d2 - op * op - oc * oc, op * op * d2);
            let s = eigensystem(&lam(dp, d2, op, oc)).unwrap();
            for (a, b) in s.eigenvalues.iter().zip(r) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dark_eigenvector_direct_substitution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let (dp, op, oc) = (
                rng.gen_range(-10.0..10.0),
                rng.gen_range(0.1..10.0),
                rng.gen_range(0.1..10.0),
            );
            let h = lam(dp, 0.0, op, oc);
            let s = eigensystem(&h).unwrap();
            let k = s.dark_index.expect("dark state");
            assert!(s.eigenvalues[k].abs() < 1e-10 * h.scale());
            let d = dark_state(op, oc).unwrap();
            let v = s.vector(k);
            let ov: Complex64 = (0..3).map(|i| v[i].conj() * d[i]).sum();
            assert!((ov.norm() - 1.0).abs() < 1e-10);
            assert!(v[1].norm() < 1e-10);
            assert!(s.max_residual(&h) < 1e-10 * h.scale());
        }
    }

    #[test]
    fn zero_matrix_identity() {
        let s = eigensystem(&lam(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(s.eigenvalues.iter().all(|&e| e == 0.0));
        assert_eq!(s.eigenvectors, CMatrix::identity(3, 3));
    }

    #[test]
    fn dark_state_examples() {
        assert_eq!(dark_state(0.0, 1.0).unwrap(), [1.0, 0.0, 0.0]);
        let d = dark_state(1.0, 0.0).unwrap();
        assert_eq!(d, [0.0, 0.0, -1.0]);
        let d = dark_state(1.0, 1.0).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((d[0] - r).abs() < 1e-15 && d[1] == 0.0 && (d[2] + r).abs() < 1e-15);
        assert!(matches!(dark_state(0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn no_dark_state_off_resonance() {
        let s = eigensystem(&lam(3.0, 0.4, 1.0, 1.2)).unwrap();
        assert_eq!(s.dark_index, None);
    }

    #[test]
    fn non_hermitian_biorthogonal() {
        let sys = LevelSystem::lambda(2.0, 0.3, 1.0, 1.0).with_decay(0.5);
        let h = build_lambda(&sys, 0.7, 1.1).unwrap();
        let s = eigensystem(&h).unwrap();
        let w = s.left_eigenvectors.as_ref().unwrap();
        let prod = w * &s.eigenvectors;
        assert!((prod - CMatrix::identity(3, 3))
            .iter()
            .all(|z| z.norm() < 1e-10));
        assert!(s.max_residual(&h) < 1e-10 * h.scale());
        let c = s.complex_eigenvalues.as_ref().unwrap();
        assert!(c.iter().all(|z| z.im <= 1e-14));
        // trace is preserved
        let tr: Complex64 = c.iter().sum();
        assert!((tr - h.matrix.trace()).norm() < 1e-12);
    }

    #[test]
    fn tracking_identity_and_swap() {
        let h = lam(1.0, 0.2, 0.5, 0.8);
        let s = eigensystem(&h).unwrap();
        let t = track_adiabatic(&s, &s).unwrap();
        assert_eq!(t.eigenvalues, s.eigenvalues);
        assert!((&t.eigenvectors - &s.eigenvectors)
            .iter()
            .all(|z| z.norm() < 1e-14));

        let mut swapped = s.clone();
        swapped.eigenvalues.swap(0, 2);
        let c0 = s.eigenvectors.column(0).clone_owned() * Complex64::new(0.0, 1.0);
        let c2 = s.eigenvectors.column(2).clone_owned();
        swapped.eigenvectors.set_column(0, &c2);
        swapped.eigenvectors.set_column(2, &c0);
        let t = track_adiabatic(&s, &swapped).unwrap();
        assert_eq!(t.eigenvalues, s.eigenvalues);
        assert!((&t.eigenvectors - &s.eigenvectors)
            .iter()
            .all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn tracking_keeps_eigenvalue_multiset() {
        let a = eigensystem(&lam(1.0, 0.2, 0.5, 0.8)).unwrap();
        let b = eigensystem(&lam(1.0, 0.2, 0.55, 0.75)).unwrap();
        let t = track_adiabatic(&a, &b).unwrap();
        let mut x = t.eigenvalues.clone();
        x.sort_by(|p, q| p.total_cmp(q));
        assert_eq!(x, b.eigenvalues);
    }

    #[test]
    fn ambiguous_assignment_requests_refinement() {
        let a = eigensystem(&lam(2.0, 1.0, 0.0, 0.0)).unwrap();
        let mut b = a.clone();
        let r = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        b.eigenvalues = vec![-1.0, 0.0, 1.0];
        b.eigenvectors = CMatrix::from_row_slice(
            3,
            3,
            &[
                r,
                r,
                Complex64::new(0.0, 0.0),
                r,
                -r,
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        b.scale = 1.0;
        assert!(matches!(
            track_adiabatic(&a, &b),
            Err(Error::StepRefinement(_))
        ));
        // leaving a degenerate point any labelling is acceptable
        let z = eigensystem(&lam(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(track_adiabatic(&z, &b).is_ok());
    }

    #[test]
    fn quadratic_landscape_force() {
        let a = 3.7e9;
        let land = FnLandscape {
            f: |x: f64, _t: f64| a * x * x,
            step: 1e-7,
            range: (-1e-4, 1e-4),
        };
        for x in [-3e-5, -1e-6, 2e-6, 4.4e-5] {
            let f = force(&land, x, 0.0).unwrap();
            let want = -HBAR * 2.0 * a * x;
            assert!((f - want).abs() <= 1e-8 * want.abs(), "{f} vs {want}");
        }
        let flat = FnLandscape {
            f: |_x: f64, _t: f64| 0.0,
            step: 1e-7,
            range: (-1e-4, 1e-4),
        };
        assert_eq!(force(&flat, 1e-5, 0.0).unwrap(), 0.0);
        // at the edge the one-sided stencil is still exact for a quadratic
        let (f, st) = force_with_stencil(&land, 1e-4, 0.0).unwrap();
        assert_eq!(st, Stencil::OneSided);
        assert!((f + HBAR * 2.0 * a * 1e-4).abs() < 1e-6 * f.abs());
    }

    #[test]
    fn gaussian_force_is_odd() {
        let land = FnLandscape {
            f: |x: f64, _t: f64| -1e8 * (-2.0 * x * x / 1e-10).exp(),
            step: 5e-8,
            range: (-1e-4, 1e-4),
        };
        for d in [1e-6, 3e-6, 8e-6] {
            let a = force(&land, d, 0.0).unwrap();
            let b = force(&land, -d, 0.0).unwrap();
            assert!((a + b).abs() < 1e-9 * a.abs());
            assert!(a < 0.0, "attracted towards the well centre");
        }
    }

    /// LiRb-scale parameters: 0.8 W, 10 μm, 300 cm⁻¹, 4 D.
    fn toy_context(delta_two: f64) -> DressingContext {
        let dp = crate::units::wavenumber_to_angular(300.0);
        let sys = LevelSystem::lambda(
            dp,
            delta_two,
            4.0 * crate::units::DEBYE,
            4.0 * crate::units::DEBYE,
        );
        let beam = |role, ct| FieldProfile {
            role,
            power: 0.8,
            waist: 10e-6,
            wavelength: 586e-9,
            center_x: 5e-6,
            center_t: ct,
            sigma_t: 0.8e-6,
            detuning: dp,
        };
        DressingContext {
            system: sys,
            probe: beam(FieldRole::Probe, 0.4e-6),
            control: beam(FieldRole::Control, -0.4e-6),
            options: ExtendedOptions::default(),
        }
    }

    #[test]
    fn dark_surface_is_flat_and_tracked_surface_continuous() {
        let ctx = toy_context(0.0);
        let xs: Vec<f64> = (0..21).map(|i| -5e-6 + 0.5e-6 * i as f64).collect();
        let ts: Vec<f64> = (0..161).map(|i| -4.4e-6 + 0.055e-6 * i as f64).collect();
        let dark = potential_surface(&ctx, 0, &xs, &ts).unwrap();
        let omax = crate::hamiltonian::rabi_frequency(
            4.0 * crate::units::DEBYE,
            crate::field::peak_amplitude(&ctx.probe),
        );
        for row in &dark.energies {
            for &e in row {
                assert!(e.abs() < 1e-10 * omax.max(ctx.system.delta_p()));
            }
        }
        assert!(dark.min_neighbour_overlap() > 0.9);

        let ctx = toy_context(-5.65e8);
        let trap = potential_surface(&ctx, 0, &xs, &ts).unwrap();
        assert!(trap.min_neighbour_overlap() > 0.9);
        // attractive light shift on the branch connected to |g⟩
        assert!(trap.extremum_shift() < 0.0);
        // far from the pulses the branch returns to its bare energy
        let depth = trap.extremum_shift().abs();
        for row in &trap.energies {
            assert!(row[0].abs() < 1e-9 * depth && row.last().unwrap().abs() < 1e-9 * depth);
        }
    }

    #[test]
    fn finite_difference_matches_hellmann_feynman() {
        let ctx = toy_context(-5.65e8);
        let xs: Vec<f64> = (0..21).map(|i| -5e-6 + 0.5e-6 * i as f64).collect();
        let ts: Vec<f64> = (0..161).map(|i| -4.4e-6 + 0.055e-6 * i as f64).collect();
        let surf = potential_surface(&ctx, 0, &xs, &ts).unwrap();
        for &(x, t) in &[
            (-1.2e-6, 0.1e-6),
            (0.0, 0.4e-6),
            (2.3e-6, -0.3e-6),
            (4.0e-6, 0.9e-6),
        ] {
            let fd = force(&surf, x, t).unwrap();
            let (_, v) = surf.branch_at(x, t).unwrap();
            let hf = ctx.hellmann_feynman_force(x, t, &v).unwrap();
            assert!(
                (fd - hf).abs() <= 1e-6 * hf.abs(),
                "x={x} t={t}: {fd} vs {hf}"
            );
        }
    }
}
