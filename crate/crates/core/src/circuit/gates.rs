//! Two-qubit scrambling gates: the Euler-angle approximation used on hardware
//! and exact Haar-random unitaries.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Number of rotation angles in an [`ApproxHaarCz`](GateSpec::ApproxHaarCz) gate:
/// three Euler angles for each of the four single-qubit rotations.
pub const N_ANGLES: usize = 12;

/// Parameters of one scrambling gate.
///
/// The 4×4 basis is ordered `|b_i b_j⟩` with the acted-on site `i` as the most
/// significant bit, so `U₁ ⊗ U₂` puts `U₁` on site `i`.
#[derive(Clone, Debug, PartialEq)]
pub enum GateSpec {
    /// `(U₁⊗U₂)·CZ^cz·(U₃⊗U₄)` with each `U = Rx(θ)Rz(ϑ)Rx(Θ)`.
    /// Angles are stored as `[U₁, U₂, U₃, U₄]`, three per rotation.
    ApproxHaarCz { angles: [f64; N_ANGLES], cz: bool },
    /// An explicit unitary.
    Matrix(Box<Mat4>),
}

impl GateSpec {
    pub fn as_matrix(&self) -> Mat4 {
        match self {
            GateSpec::ApproxHaarCz { angles, cz } => approx_haar_gate(angles, *cz),
            GateSpec::Matrix(m) => **m,
        }
    }

    pub fn sample_approx<R: Rng + ?Sized>(rng: &mut R, cz: bool) -> Self {
        let mut angles = [0.0; N_ANGLES];
        for a in angles.iter_mut() {
            *a = rng.random::<f64>() * TAU;
        }
        GateSpec::ApproxHaarCz { angles, cz }
    }
}

pub fn rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let d = C64::new(c, 0.0);
    let o = C64::new(0.0, -s);
    Mat2::new(d, o, o, d)
}

pub fn rz(theta: f64) -> Mat2 {
    let h = theta / 2.0;
    Mat2::new(
        C64::from_polar(1.0, -h),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::from_polar(1.0, h),
    )
}

/// `Rx(θ)·Rz(ϑ)·Rx(Θ)`.
pub fn euler_rotation(theta: f64, vartheta: f64, big_theta: f64) -> Mat2 {
    rx(theta) * rz(vartheta) * rx(big_theta)
}

pub fn cz() -> Mat4 {
    let mut m = Mat4::identity();
    m[(3, 3)] = C64::new(-1.0, 0.0);
    m
}

/// Kronecker product with `a` acting on the more significant qubit.
pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, c| a[(r >> 1, c >> 1)] * b[(r & 1, c & 1)])
}

pub fn approx_haar_gate(angles: &[f64; N_ANGLES], cz_present: bool) -> Mat4 {
    let u = |k: usize| euler_rotation(angles[3 * k], angles[3 * k + 1], angles[3 * k + 2]);
    let outer = kron2(&u(0), &u(1));
    let inner = kron2(&u(2), &u(3));
    if cz_present {
        outer * cz() * inner
    } else {
        outer * inner
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Haar-random `n×n` unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`, so that `R_ii > 0`.
pub fn haar_unitary_dyn<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    loop {
        let qr = gaussian_matrix(n, rng).qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].norm() < 1e-10) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            let phase = r[(j, j)] / r[(j, j)].norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        return q;
    }
}

pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    Mat4::from_iterator(haar_unitary_dyn(4, rng).iter().copied())
}

pub fn haar_unitary_2<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    Mat2::from_iterator(haar_unitary_dyn(2, rng).iter().copied())
}

/// Largest entry of `|U†U − I|`.
pub fn unitarity_defect(u: &Mat4) -> f64 {
    let d = u.adjoint() * u - Mat4::identity();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
