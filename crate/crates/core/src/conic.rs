//! One convex subproblem of the alternating loop and the conic backend that
//! solves it.
//!
//! The subproblem maximizes `sum_k (c_k - d_k) + l_c` over a lifted PSD
//! variable `X` (standing in for `p p^H`), per-user scalars `a, b, c, d`,
//! and the common-rate slack `l_c`, subject to
//!
//! - `a_k - b_k >= l_c`
//! - `tr(A_k X) >= exp(a_k)` and `tr(B_k X) >= exp(c_k)` (exponential cones)
//! - `tr(B_k X) <= exp(bb_k) (b_k - bb_k + 1)` and the same for `D_k, d_k`
//!   (first-order expansions of `exp` around the anchors `bb_k`, `dd_k`)
//! - `X >= 0`, `tr(X) = p_t`, and masked stacked blocks of `X` forced to
//!   zero (realized as dimension reduction, so restricted schemes reuse the
//!   identical solver path)
//!
//! The complex Hermitian `X` is handled through the standard real embedding
//! `M -> [[Re M, -Im M], [Im M, Re M]]`, under which
//! `tr(M X) = tr(embed(M) Y) / 2` for any real symmetric `Y` that extracts
//! to `X`. The backend is Clarabel, an interior-point solver with native PSD
//! and exponential cones.

use std::collections::BTreeSet;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus as ClarabelStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::rates::StackedMatrices;
use crate::{Error, Result};

/// Default solver tolerance for constraint satisfaction.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Real embedding of a complex Hermitian matrix:
/// `[[Re M, -Im M], [Im M, Re M]]`.
///
/// The embedding doubles dimensions, preserves positive semidefiniteness,
/// and doubles traces: `tr(M X) = tr(embed(M) embed(X)) / 2`. The input must
/// be Hermitian to 1e-10 (relative to its largest entry).
pub fn real_embed(m: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not Hermitian at ({i}, {j})"
                )));
            }
        }
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// Inverse of [`real_embed`] for an arbitrary real symmetric matrix of even
/// dimension: averages the two real blocks and antisymmetrizes the imaginary
/// ones, so any PSD `Y` extracts to a Hermitian PSD complex matrix.
pub fn complex_from_embed(y: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let nr = y.nrows();
    if y.ncols() != nr || nr % 2 != 0 {
        return Err(Error::DimensionMismatch(
            "embedded matrix must be square with even dimension".into(),
        ));
    }
    let n = nr / 2;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
            let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(out)
}

/// Scaled upper-triangle vectorization (column-major, off-diagonals times
/// sqrt 2) so that `svec(M) . svec(Y) = tr(M Y)`. Matches Clarabel's PSD
/// triangle cone layout.
fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                v.push(m[(i, j)]);
            } else {
                v.push(std::f64::consts::SQRT_2 * m[(i, j)]);
            }
        }
    }
    v
}

fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            let val = if i == j {
                v[idx]
            } else {
                v[idx] / std::f64::consts::SQRT_2
            };
            m[(i, j)] = val;
            m[(j, i)] = val;
            idx += 1;
        }
    }
    m
}

/// svec index of diagonal entry `(j, j)`.
fn svec_diag_index(j: usize) -> usize {
    j * (j + 1) / 2 + j
}

/// One convex subproblem instance: stacked matrices, the CCCP linearization
/// anchors (natural logs of the previous `b_k`, `d_k`), the total power, and
/// the set of stacked-block indices forced to zero.
#[derive(Debug, Clone)]
pub struct ConicSubproblem {
    pub stacked: Vec<StackedMatrices>,
    pub anchors_b: Vec<f64>,
    pub anchors_d: Vec<f64>,
    pub p_t: f64,
    /// Stacked-block indices (0-based, common block = `K`) whose rows and
    /// columns of `X` are identically zero.
    pub mask: BTreeSet<usize>,
}

/// Validates and packages one subproblem.
pub fn assemble(
    stacked: Vec<StackedMatrices>,
    anchors_b: Vec<f64>,
    anchors_d: Vec<f64>,
    p_t: f64,
    mask: BTreeSet<usize>,
) -> Result<ConicSubproblem> {
    let k = stacked.len();
    if k == 0 {
        return Err(Error::InvalidParameter("no stacked matrices".into()));
    }
    if anchors_b.len() != k || anchors_d.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "need {k} anchors per family, got {} and {}",
            anchors_b.len(),
            anchors_d.len()
        )));
    }
    if anchors_b.iter().chain(anchors_d.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("anchors must be finite".into()));
    }
    if !(p_t > 0.0) || !p_t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p_t must be positive and finite, got {p_t}"
        )));
    }
    let dims = stacked[0].block_dims.clone();
    if stacked.iter().any(|s| s.block_dims != dims) {
        return Err(Error::DimensionMismatch(
            "stacked matrices disagree on block structure".into(),
        ));
    }
    let n_blocks = dims.len();
    if mask.iter().any(|&j| j >= n_blocks) {
        return Err(Error::InvalidParameter(format!(
            "mask indices must lie in 0..{n_blocks}"
        )));
    }
    if mask.len() >= n_blocks {
        return Err(Error::InvalidParameter(
            "mask cannot disable every stacked block".into(),
        ));
    }
    Ok(ConicSubproblem {
        stacked,
        anchors_b,
        anchors_d,
        p_t,
        mask,
    })
}

/// Termination state of one subproblem solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    /// Solved at reduced accuracy; the iterate is still usable.
    Inaccurate,
    Infeasible,
    Failed,
}

impl ConicStatus {
    pub fn is_usable(self) -> bool {
        matches!(self, ConicStatus::Optimal | ConicStatus::Inaccurate)
    }
}

/// Solution of one subproblem. `x_star` is reported at full stacked
/// dimension with masked blocks identically zero, Hermitian-symmetrized.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x_star: DMatrix<Complex64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub l_c: f64,
    /// Value of `sum_k (c_k - d_k) + l_c` (natural-log domain; divide by
    /// ln 2 for a bits/s/Hz bound).
    pub objective: f64,
    pub solver_status: ConicStatus,
}

impl SubproblemSolution {
    fn failure(status: ConicStatus, dim: usize, k: usize) -> Self {
        Self {
            x_star: DMatrix::zeros(dim, dim),
            a: vec![0.0; k],
            b: vec![0.0; k],
            c: vec![0.0; k],
            d: vec![0.0; k],
            l_c: 0.0,
            objective: f64::NEG_INFINITY,
            solver_status: status,
        }
    }
}

/// Sparse triplet accumulator for Clarabel's CSC input.
struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    fn build(mut self) -> CscMatrix<f64> {
        self.entries
            .sort_by(|x, y| (x.1, x.0).cmp(&(y.1, y.0)));
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowval = Vec::with_capacity(self.entries.len());
        let mut nzval = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
        }
        for c in 0..self.ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix::new(self.nrows, self.ncols, colptr, rowval, nzval)
    }
}

/// Solves one subproblem to tolerance `tol`.
///
/// Infeasibility and numerical failure are reported in the returned status,
/// never panicked. Internally the problem is normalized to `tr(X) = 1` by
/// shifting all log-domain variables by `ln p_t`, which keeps the
/// exponential cones well scaled at high SNR; returned values are
/// un-shifted.
pub fn solve(sub: &ConicSubproblem, tol: f64) -> SubproblemSolution {
    assert!(tol > 0.0, "tolerance must be positive");
    let k = sub.stacked.len();
    let full_dim = sub.stacked[0].dim();
    let dims = &sub.stacked[0].block_dims;

    // Masked blocks are removed outright; the reduced problem has a strictly
    // feasible interior, which zero-pinning rows would destroy.
    let keep: Vec<usize> = (0..dims.len())
        .filter(|j| !sub.mask.contains(j))
        .flat_map(|j| {
            let off = sub.stacked[0].block_offset(j);
            off..off + dims[j]
        })
        .collect();
    let m = keep.len();
    let mr = 2 * m;
    let t = mr * (mr + 1) / 2;
    let nv = t + 4 * k + 1;
    let col_a = |i: usize| t + i;
    let col_b = |i: usize| t + k + i;
    let col_c = |i: usize| t + 2 * k + i;
    let col_d = |i: usize| t + 3 * k + i;
    let col_lc = t + 4 * k;

    let shift = sub.p_t.ln();

    let reduce_embed_svec = |mat: &DMatrix<Complex64>| -> Vec<f64> {
        let red = mat.select_rows(keep.iter()).select_columns(keep.iter());
        let emb = real_embed(&red).expect("stacked matrices are Hermitian by construction");
        svec(&emb)
    };

    let svec_a: Vec<Vec<f64>> = sub.stacked.iter().map(|s| reduce_embed_svec(&s.a)).collect();
    let svec_b: Vec<Vec<f64>> = sub.stacked.iter().map(|s| reduce_embed_svec(&s.b)).collect();
    let svec_d: Vec<Vec<f64>> = sub.stacked.iter().map(|s| reduce_embed_svec(&s.d)).collect();

    let nrows = 1 + 3 * k + t + 6 * k;
    let mut a_mat = TripletBuilder::new(nrows, nv);
    let mut rhs = vec![0.0; nrows];

    // tr(X) = 1 in normalized units, i.e. tr(Y) = 2.
    for j in 0..mr {
        a_mat.push(0, svec_diag_index(j), 1.0);
    }
    rhs[0] = 2.0;

    // b_k + l_c - a_k <= 0.
    for i in 0..k {
        let r = 1 + i;
        a_mat.push(r, col_a(i), -1.0);
        a_mat.push(r, col_b(i), 1.0);
        a_mat.push(r, col_lc, 1.0);
    }

    // Linearized upper bounds around the anchors.
    for i in 0..k {
        let anchor = sub.anchors_b[i] - shift;
        let coef = anchor.exp();
        if !coef.is_finite() || coef == 0.0 {
            return SubproblemSolution::failure(ConicStatus::Failed, full_dim, k);
        }
        let r = 1 + k + i;
        for (idx, &v) in svec_b[i].iter().enumerate() {
            a_mat.push(r, idx, 0.5 * v);
        }
        a_mat.push(r, col_b(i), -coef);
        rhs[r] = coef * (1.0 - anchor);
    }
    for i in 0..k {
        let anchor = sub.anchors_d[i] - shift;
        let coef = anchor.exp();
        if !coef.is_finite() || coef == 0.0 {
            return SubproblemSolution::failure(ConicStatus::Failed, full_dim, k);
        }
        let r = 1 + 2 * k + i;
        for (idx, &v) in svec_d[i].iter().enumerate() {
            a_mat.push(r, idx, 0.5 * v);
        }
        a_mat.push(r, col_d(i), -coef);
        rhs[r] = coef * (1.0 - anchor);
    }

    // Y in the PSD triangle cone.
    let psd_base = 1 + 3 * k;
    for idx in 0..t {
        a_mat.push(psd_base + idx, idx, -1.0);
    }

    // (a_k, 1, tr(A_k X)) and (c_k, 1, tr(B_k X)) in exponential cones.
    let exp_base = psd_base + t;
    for i in 0..k {
        let r = exp_base + 3 * i;
        a_mat.push(r, col_a(i), -1.0);
        rhs[r + 1] = 1.0;
        for (idx, &v) in svec_a[i].iter().enumerate() {
            a_mat.push(r + 2, idx, -0.5 * v);
        }
    }
    for i in 0..k {
        let r = exp_base + 3 * (k + i);
        a_mat.push(r, col_c(i), -1.0);
        rhs[r + 1] = 1.0;
        for (idx, &v) in svec_b[i].iter().enumerate() {
            a_mat.push(r + 2, idx, -0.5 * v);
        }
    }

    // Maximize sum(c - d) + l_c.
    let mut q = vec![0.0; nv];
    for i in 0..k {
        q[col_c(i)] = -1.0;
        q[col_d(i)] = 1.0;
    }
    q[col_lc] = -1.0;

    let mut cones: Vec<SupportedConeT<f64>> = vec![
        SupportedConeT::ZeroConeT(1),
        SupportedConeT::NonnegativeConeT(3 * k),
        SupportedConeT::PSDTriangleConeT(mr),
    ];
    cones.extend((0..2 * k).map(|_| SupportedConeT::ExponentialConeT()));

    let settings = DefaultSettings {
        verbose: false,
        max_iter: 200,
        tol_gap_abs: 0.1 * tol,
        tol_gap_rel: 0.1 * tol,
        tol_feas: 0.1 * tol,
        ..DefaultSettings::default()
    };
    let p_mat = CscMatrix::zeros((nv, nv));
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat.build(), &rhs, &cones, settings);
    solver.solve();

    let status = match solver.solution.status {
        ClarabelStatus::Solved => ConicStatus::Optimal,
        ClarabelStatus::AlmostSolved => ConicStatus::Inaccurate,
        ClarabelStatus::PrimalInfeasible | ClarabelStatus::AlmostPrimalInfeasible => {
            ConicStatus::Infeasible
        }
        _ => ConicStatus::Failed,
    };
    if !status.is_usable() {
        return SubproblemSolution::failure(status, full_dim, k);
    }

    let x = &solver.solution.x;
    let y = smat(&x[..t], mr);
    let x_red = complex_from_embed(&y).expect("solver Y has even dimension")
        * Complex64::new(sub.p_t, 0.0);
    let mut x_full = DMatrix::zeros(full_dim, full_dim);
    for (ri, &i) in keep.iter().enumerate() {
        for (ci, &j) in keep.iter().enumerate() {
            x_full[(i, j)] = x_red[(ri, ci)];
        }
    }
    let x_full = (&x_full + x_full.adjoint()) * Complex64::new(0.5, 0.0);

    let a: Vec<f64> = (0..k).map(|i| x[col_a(i)] + shift).collect();
    let b: Vec<f64> = (0..k).map(|i| x[col_b(i)] + shift).collect();
    let c: Vec<f64> = (0..k).map(|i| x[col_c(i)] + shift).collect();
    let d: Vec<f64> = (0..k).map(|i| x[col_d(i)] + shift).collect();
    let l_c = x[col_lc];
    let objective = (0..k).map(|i| c[i] - d[i]).sum::<f64>() + l_c;

    SubproblemSolution {
        x_star: x_full,
        a,
        b,
        c,
        d,
        l_c,
        objective,
        solver_status: status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{derive_seed, draw_csi};
    use crate::rates::{build_stacked, objective_f};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        &g * g.adjoint()
    }

    fn random_unit_power_point(csi: &crate::channel::CsiModel, p_t: f64, seed: u64) -> DVector<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = csi.nt * (csi.k_users + 1);
        let v = DVector::from_fn(n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let scale = (p_t / v.norm_squared()).sqrt();
        v * Complex64::new(scale, 0.0)
    }

    #[test]
    fn embed_identity_is_identity() {
        let id = DMatrix::from_diagonal_element(3, 3, Complex64::new(1.0, 0.0));
        let emb = real_embed(&id).unwrap();
        assert_eq!(emb, DMatrix::<f64>::identity(6, 6));
    }

    #[test]
    fn embed_preserves_eigenvalues_doubled() {
        // [[0, i], [-i, 0]] has eigenvalues +-1; the embedding doubles them.
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let emb = real_embed(&m).unwrap();
        let mut eigs: Vec<f64> = emb.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [-1.0, -1.0, 1.0, 1.0];
        for (e, x) in eigs.iter().zip(expected) {
            assert_relative_eq!(*e, x, epsilon = 1e-10);
        }
    }

    #[test]
    fn embed_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        assert!(real_embed(&m).is_err());
    }

    #[test]
    fn trace_identity_under_embedding() {
        for seed in 0..10 {
            let a = random_hermitian(4, seed);
            let x = random_psd(4, seed + 100);
            let lhs = (&a * &x).trace().re;
            let sa = svec(&real_embed(&a).unwrap());
            let sx = svec(&real_embed(&x).unwrap());
            let rhs: f64 = 0.5 * sa.iter().zip(&sx).map(|(u, v)| u * v).sum::<f64>();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn svec_smat_round_trip_and_trace() {
        for seed in 0..10 {
            let m = real_embed(&random_hermitian(3, seed)).unwrap();
            let v = svec(&m);
            let back = smat(&v, 6);
            for (a, b) in back.iter().zip(m.iter()) {
                assert_relative_eq!(a, b, max_relative = 1e-15, epsilon = 1e-300);
            }
            let y = real_embed(&random_psd(3, seed + 50)).unwrap();
            let ip: f64 = svec(&m).iter().zip(svec(&y)).map(|(u, v)| u * v).sum();
            assert_relative_eq!(ip, (&m * &y).trace(), max_relative = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn embed_round_trips(seed in 0u64..1000) {
            let m = random_hermitian(4, seed);
            let back = complex_from_embed(&real_embed(&m).unwrap()).unwrap();
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn embed_preserves_psd(seed in 0u64..1000) {
            let m = random_psd(3, seed);
            let emb = real_embed(&m).unwrap();
            let min_eig = emb
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            prop_assert!(min_eig >= -1e-10 * m.trace().re.max(1.0));
        }
    }

    #[test]
    fn assemble_validates_inputs() {
        let csi = draw_csi(2, 2, 0.05, 1.0, 1).unwrap();
        let stacked = build_stacked(&csi, 2.0).unwrap();
        assert!(assemble(stacked.clone(), vec![0.0; 2], vec![0.0; 2], 2.0, BTreeSet::new()).is_ok());
        assert!(assemble(stacked.clone(), vec![0.0], vec![0.0; 2], 2.0, BTreeSet::new()).is_err());
        assert!(assemble(
            stacked.clone(),
            vec![f64::NAN; 2],
            vec![0.0; 2],
            2.0,
            BTreeSet::new()
        )
        .is_err());
        assert!(assemble(
            stacked.clone(),
            vec![0.0; 2],
            vec![0.0; 2],
            2.0,
            BTreeSet::from([3])
        )
        .is_err());
        assert!(assemble(
            stacked,
            vec![0.0; 2],
            vec![0.0; 2],
            2.0,
            BTreeSet::from([0, 1, 2])
        )
        .is_err());
    }

    /// Anchors taken at a feasible rank-one point make the subproblem
    /// feasible, and the optimum dominates that point's objective.
    #[test]
    fn anchor_point_is_feasible_lower_bound() {
        for seed in 0..5 {
            let csi = draw_csi(2, 2, 0.05, 1.0, seed).unwrap();
            let p_t = 10.0;
            let stacked = build_stacked(&csi, p_t).unwrap();
            let p0 = random_unit_power_point(&csi, p_t, derive_seed(9, seed));
            let anchors_b: Vec<f64> = stacked
                .iter()
                .map(|s| crate::rates::quad_form(&s.b, &p0).ln())
                .collect();
            let anchors_d: Vec<f64> = stacked
                .iter()
                .map(|s| crate::rates::quad_form(&s.d, &p0).ln())
                .collect();
            let sub = assemble(
                stacked.clone(),
                anchors_b,
                anchors_d,
                p_t,
                BTreeSet::new(),
            )
            .unwrap();
            let sol = solve(&sub, DEFAULT_TOL);
            assert_eq!(sol.solver_status, ConicStatus::Optimal);

            let f0 = objective_f(&stacked, &p0).unwrap();
            assert!(
                sol.objective >= std::f64::consts::LN_2 * f0 - 1e-6,
                "objective {} below anchor-point bound {}",
                sol.objective,
                std::f64::consts::LN_2 * f0
            );

            // Constraint satisfaction at the returned solution.
            let x = &sol.x_star;
            assert_relative_eq!(x.trace().re, p_t, max_relative = 1e-6);
            let min_eig = x
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig >= -1e-8 * p_t);
            for (i, s) in sub.stacked.iter().enumerate() {
                let tr_a = (&s.a * x).trace().re;
                let tr_b = (&s.b * x).trace().re;
                let tr_d = (&s.d * x).trace().re;
                assert!(tr_a >= sol.a[i].exp() * (1.0 - 1e-6));
                assert!(tr_b >= sol.c[i].exp() * (1.0 - 1e-6));
                let lin_b = sub.anchors_b[i].exp() * (sol.b[i] - sub.anchors_b[i] + 1.0);
                let lin_d = sub.anchors_d[i].exp() * (sol.d[i] - sub.anchors_d[i] + 1.0);
                assert!(tr_b <= lin_b + 1e-6 * lin_b.abs().max(1.0));
                assert!(tr_d <= lin_d + 1e-6 * lin_d.abs().max(1.0));
                assert!(sol.a[i] - sol.b[i] >= sol.l_c - 1e-8);
            }
        }
    }

    #[test]
    fn full_problem_dimension_is_nt_times_k_plus_one() {
        let csi = draw_csi(2, 2, 0.05, 1.0, 3).unwrap();
        let p_t = 4.0;
        let stacked = build_stacked(&csi, p_t).unwrap();
        let sub = assemble(stacked, vec![1.0; 2], vec![0.5; 2], p_t, BTreeSet::new()).unwrap();
        let sol = solve(&sub, DEFAULT_TOL);
        assert_eq!(sol.x_star.nrows(), 6);
        assert_eq!(sol.x_star.ncols(), 6);
    }

    /// Masking the common block (SDMA) zeroes its rows and columns of `X`.
    #[test]
    fn common_mask_zeroes_common_block() {
        let csi = draw_csi(2, 2, 0.05, 1.0, 4).unwrap();
        let p_t = 5.0;
        let stacked = build_stacked(&csi, p_t).unwrap();
        let p0 = random_unit_power_point(&csi, p_t, 11);
        let anchors_b: Vec<f64> = stacked
            .iter()
            .map(|s| crate::rates::quad_form(&s.b, &p0).ln())
            .collect();
        let anchors_d: Vec<f64> = stacked
            .iter()
            .map(|s| crate::rates::quad_form(&s.d, &p0).ln())
            .collect();
        let sub = assemble(stacked, anchors_b, anchors_d, p_t, BTreeSet::from([2])).unwrap();
        let sol = solve(&sub, DEFAULT_TOL);
        assert!(sol.solver_status.is_usable());
        for i in 4..6 {
            for j in 0..6 {
                assert_eq!(sol.x_star[(i, j)], Complex64::new(0.0, 0.0));
                assert_eq!(sol.x_star[(j, i)], Complex64::new(0.0, 0.0));
            }
        }
        assert_relative_eq!(sol.x_star.trace().re, p_t, max_relative = 1e-6);
    }

    /// With every private block masked (K = 1), all power lands on the
    /// common stream.
    #[test]
    fn all_private_masked_puts_power_on_common() {
        let csi = draw_csi(2, 1, 0.1, 1.0, 5).unwrap();
        let p_t = 3.0;
        let stacked = build_stacked(&csi, p_t).unwrap();
        let sub = assemble(stacked, vec![1.0], vec![0.5], p_t, BTreeSet::from([0])).unwrap();
        let sol = solve(&sub, DEFAULT_TOL);
        assert!(sol.solver_status.is_usable());
        let common_power: f64 = (2..4).map(|i| sol.x_star[(i, i)].re).sum();
        assert_relative_eq!(common_power, p_t, max_relative = 1e-6);
        for i in 0..2 {
            assert_eq!(sol.x_star[(i, i)], Complex64::new(0.0, 0.0));
        }
    }
}
