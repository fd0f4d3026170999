use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
/// 2×2 complex matrix stored row-major.
pub type Mat2 = [[C64; 2]; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Probe spin-1 sublevel. Matrix index order is `+1, 0, −1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ProbeLevel {
    Plus,
    Zero,
    Minus,
}

impl ProbeLevel {
    pub const ALL: [ProbeLevel; 3] = [ProbeLevel::Plus, ProbeLevel::Zero, ProbeLevel::Minus];

    pub fn index(self) -> usize {
        match self {
            ProbeLevel::Plus => 0,
            ProbeLevel::Zero => 1,
            ProbeLevel::Minus => 2,
        }
    }

    /// S_z eigenvalue.
    pub fn m(self) -> f64 {
        match self {
            ProbeLevel::Plus => 1.0,
            ProbeLevel::Zero => 0.0,
            ProbeLevel::Minus => -1.0,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// A two-level subspace of the probe. `a` plays the role of |↑⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Transition {
    pub a: ProbeLevel,
    pub b: ProbeLevel,
}

impl Transition {
    /// {0, −1}, the measurement basis.
    pub const ZERO_MINUS: Transition = Transition {
        a: ProbeLevel::Zero,
        b: ProbeLevel::Minus,
    };
    /// {0, +1}, the compensating basis.
    pub const ZERO_PLUS: Transition = Transition {
        a: ProbeLevel::Zero,
        b: ProbeLevel::Plus,
    };
    /// {+1, −1}, the balanced basis.
    pub const PLUS_MINUS: Transition = Transition {
        a: ProbeLevel::Plus,
        b: ProbeLevel::Minus,
    };

    /// σ_x on the subspace, as a probe operator.
    pub fn sigma_x(self) -> Matrix3<C64> {
        let mut m = Matrix3::zeros();
        m[(self.a.index(), self.b.index())] = ONE;
        m[(self.b.index(), self.a.index())] = ONE;
        m
    }

    /// σ_y on the subspace: −i|a⟩⟨b| + i|b⟩⟨a|.
    pub fn sigma_y(self) -> Matrix3<C64> {
        let mut m = Matrix3::zeros();
        m[(self.a.index(), self.b.index())] = -I;
        m[(self.b.index(), self.a.index())] = I;
        m
    }

    /// σ_z on the subspace: |a⟩⟨a| − |b⟩⟨b|.
    pub fn sigma_z(self) -> Matrix3<C64> {
        let mut m = Matrix3::zeros();
        m[(self.a.index(), self.a.index())] = ONE;
        m[(self.b.index(), self.b.index())] = -ONE;
        m
    }

    /// exp(−iθ/2 (cos φ σ_x + sin φ σ_y)) on the subspace, identity elsewhere.
    pub fn rotation(self, angle: f64, phase: f64) -> Matrix3<C64> {
        let (s, c) = (angle / 2.0).sin_cos();
        let mut r = Matrix3::identity();
        let (a, b) = (self.a.index(), self.b.index());
        r[(a, a)] = C64::new(c, 0.0);
        r[(b, b)] = C64::new(c, 0.0);
        r[(a, b)] = -I * s * C64::from_polar(1.0, -phase);
        r[(b, a)] = -I * s * C64::from_polar(1.0, phase);
        r
    }

    /// (|a⟩ + e^{iφ}|b⟩)/√2 for the given phase.
    pub fn superposition(self, phase: f64) -> [C64; 3] {
        let mut v = [ZERO; 3];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        v[self.a.index()] = C64::new(h, 0.0);
        v[self.b.index()] = C64::from_polar(h, phase);
        v
    }
}

/// Basis vector for one probe level.
pub fn probe_ket(level: ProbeLevel) -> [C64; 3] {
    let mut v = [ZERO; 3];
    v[level.index()] = ONE;
    v
}

pub fn sigma_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn sigma_y() -> Mat2 {
    [[ZERO, -I], [I, ZERO]]
}

pub fn sigma_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

pub fn mat2_to_dense(m: &Mat2) -> CMatrix {
    DMatrix::from_fn(2, 2, |r, c| m[r][c])
}

/// Single-spin operator `op` acting on spin `j` of `k` (spin 0 is the most significant factor).
pub fn embed_spin(op: &Mat2, j: usize, k: usize) -> CMatrix {
    let left = DMatrix::<C64>::identity(1 << j, 1 << j);
    let right = DMatrix::<C64>::identity(1 << (k - 1 - j), 1 << (k - 1 - j));
    left.kronecker(&mat2_to_dense(op)).kronecker(&right)
}

/// Kronecker product of 2×2 factors, first factor most significant.
pub fn kron_all(factors: &[Mat2]) -> CMatrix {
    let mut out = DMatrix::<C64>::identity(1, 1);
    for f in factors {
        out = out.kronecker(&mat2_to_dense(f));
    }
    out
}

/// Largest entry of |M − M†|.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |U†U − 1|.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let p = u.adjoint() * u;
    let n = p.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((p[(r, c)] - target).norm());
        }
    }
    worst
}

/// Trace distance ½‖a − b‖₁ between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a - b;
    if d.norm() == 0.0 {
        return 0.0;
    }
    let d = (&d + d.adjoint()) * C64::new(0.5, 0.0);
    0.5 * d.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>()
}

/// Whether the trace distance is below `tol`, with the value (or a bound on
/// it) that decided. Uses ½‖Δ‖_F ≤ ½‖Δ‖₁ ≤ ½√n‖Δ‖_F before falling back to
/// an eigendecomposition.
pub fn trace_distance_below(a: &CMatrix, b: &CMatrix, tol: f64) -> (bool, f64) {
    let d = a - b;
    let fro = d.norm();
    let n = d.nrows() as f64;
    if 0.5 * n.sqrt() * fro < tol {
        return (true, 0.5 * n.sqrt() * fro);
    }
    if 0.5 * fro >= tol {
        return (false, 0.5 * fro);
    }
    let td = trace_distance(a, b);
    (td < tol, td)
}
