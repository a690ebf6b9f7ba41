//! Pivot calibration (tip offset in the tool-body frame) and reference
//! calibration (left-to-right reference transform).
//!
//! Pivot calibration rotates an instrument about a fixed local point; every
//! sample then satisfies `R_i * p + t_i = g` for the unknown tip offset `p`
//! (tool frame) and pivot point `g` (camera frame). Stacking all samples as
//! `[R_i | -I] * [p; g] = -t_i` gives a linear least-squares problem that
//! yields both unknowns and a residual in one solve.
//!
//! Reference calibration averages the relative transform between the two
//! stationary reference markers as seen simultaneously by one camera.

use nalgebra::{DMatrix, DVector, Matrix4, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6};
use thiserror::Error;

use crate::pose::RigidTransform;

/// Minimum rotation coverage for a usable pivot solve; below this the
/// normal-equation system is near-singular (see the conditioning study in
/// the tests).
pub const MIN_COVERAGE_DEG: f64 = 15.0;

/// Normal-equation condition number beyond which the solver falls back to an
/// orthogonal factorization of the full stacked system.
pub const CONDITION_FALLBACK: f64 = 1e8;

/// Lever arm used to express rotation deviations in millimetres when
/// reporting the reference-calibration residual.
pub const RESIDUAL_LEVER_ARM_MM: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum CalibError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("rotation coverage {coverage_deg:.2} deg is below the {MIN_COVERAGE_DEG} deg minimum; rotate the instrument further around the pivot")]
    DegenerateRotations { coverage_deg: f64 },
    #[error("no simultaneous reference pairs")]
    NoPairs,
}

/// Result of a pivot calibration. `tip_offset` is the translation part of
/// the tool-tip transform; its rotation is fixed to identity because the tip
/// is a point, not a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotCalibration {
    pub tip_offset: Vector3<f64>,
    pub pivot_point: Vector3<f64>,
    pub rms_residual: f64,
    pub sample_count: usize,
    pub rotation_coverage_deg: f64,
}

/// Result of a reference calibration: the transform taking left-reference
/// coordinates into right-reference (global) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCalibration {
    pub left_to_right: RigidTransform,
    pub rms_residual: f64,
    pub pair_count: usize,
}

/// Maximum pairwise geodesic rotation angle across the samples, in degrees.
pub fn rotation_coverage(samples: &[RigidTransform]) -> Result<f64, CalibError> {
    if samples.len() < 2 {
        return Err(CalibError::TooFewSamples {
            got: samples.len(),
            min: 2,
        });
    }
    let mut max_angle = 0.0f64;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            max_angle = max_angle.max(samples[i].rotation_angle_to(&samples[j]));
        }
    }
    Ok(max_angle.to_degrees())
}

/// Solves the pivot-calibration least squares over tool-body poses observed
/// in the camera frame.
pub fn pivot_calibrate(samples: &[RigidTransform]) -> Result<PivotCalibration, CalibError> {
    if samples.len() < 3 {
        return Err(CalibError::TooFewSamples {
            got: samples.len(),
            min: 3,
        });
    }
    let coverage_deg = rotation_coverage(samples)?;
    if coverage_deg < MIN_COVERAGE_DEG {
        return Err(CalibError::DegenerateRotations { coverage_deg });
    }

    let n = samples.len() as f64;
    // Normal equations of the stacked system [R_i | -I] [p; g] = -t_i:
    //   [ n*I      -sum(R_i^T) ] [p]   [ -sum(R_i^T t_i) ]
    //   [ -sum(R_i)  n*I       ] [g] = [  sum(t_i)       ]
    let mut sum_r = nalgebra::Matrix3::<f64>::zeros();
    let mut sum_rt_t = Vector3::zeros();
    let mut sum_t = Vector3::zeros();
    for s in samples {
        let r = s.rotation_matrix();
        sum_r += r;
        sum_rt_t += r.transpose() * s.translation;
        sum_t += s.translation;
    }
    let mut m = Matrix6::<f64>::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(nalgebra::Matrix3::identity() * n));
    m.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-sum_r.transpose()));
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-sum_r));
    m.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(nalgebra::Matrix3::identity() * n));
    let mut rhs = Vector6::zeros();
    rhs.fixed_rows_mut::<3>(0).copy_from(&(-sum_rt_t));
    rhs.fixed_rows_mut::<3>(3).copy_from(&sum_t);

    let eig = m.symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    let lambda_min = eig.eigenvalues.min();
    let cond = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };

    let x = if cond <= CONDITION_FALLBACK {
        m.cholesky()
            .map(|ch| ch.solve(&rhs))
            .unwrap_or_else(|| solve_stacked_svd(samples))
    } else {
        solve_stacked_svd(samples)
    };

    let tip_offset = Vector3::new(x[0], x[1], x[2]);
    let pivot_point = Vector3::new(x[3], x[4], x[5]);

    let mut ss = 0.0;
    for s in samples {
        let r = s.transform_point(&tip_offset) - pivot_point;
        ss += r.norm_squared();
    }
    let rms_residual = (ss / samples.len() as f64).sqrt();

    Ok(PivotCalibration {
        tip_offset,
        pivot_point,
        rms_residual,
        sample_count: samples.len(),
        rotation_coverage_deg: coverage_deg,
    })
}

/// Orthogonal-factorization fallback on the full 3n x 6 stacked matrix.
fn solve_stacked_svd(samples: &[RigidTransform]) -> Vector6<f64> {
    let n = samples.len();
    let mut a = DMatrix::<f64>::zeros(3 * n, 6);
    let mut b = DVector::<f64>::zeros(3 * n);
    for (i, s) in samples.iter().enumerate() {
        let r = s.rotation_matrix();
        a.view_mut((3 * i, 0), (3, 3)).copy_from(&r);
        a.view_mut((3 * i, 3), (3, 3))
            .copy_from(&(-nalgebra::Matrix3::<f64>::identity()));
        b.rows_mut(3 * i, 3).copy_from(&(-s.translation));
    }
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-12).expect("SVD solve on stacked system");
    Vector6::from_iterator(x.iter().copied())
}

/// Averages the per-pair relative transform `invert(right) * left` over
/// simultaneous observations of both reference markers.
///
/// The rotation average is the principal eigenvector of the accumulated
/// quaternion outer-product matrix; the translation average is arithmetic.
/// The residual reports the RMS deviation of individual pair estimates from
/// the mean, with rotation deviations converted to millimetres via a
/// 100 mm lever arm.
pub fn reference_calibrate(
    pairs: &[(RigidTransform, RigidTransform)],
) -> Result<ReferenceCalibration, CalibError> {
    if pairs.is_empty() {
        return Err(CalibError::NoPairs);
    }
    let rels: Vec<RigidTransform> = pairs
        .iter()
        .map(|(right, left)| right.invert().compose(left))
        .collect();

    let mut acc = Matrix4::<f64>::zeros();
    let mut t_mean = Vector3::zeros();
    for rel in &rels {
        let q = rel.rotation.quaternion().coords;
        acc += q * q.transpose();
        t_mean += rel.translation;
    }
    t_mean /= rels.len() as f64;

    let eig = acc.symmetric_eigen();
    let mut best = 0;
    for i in 1..4 {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let v = eig.eigenvectors.column(best);
    // coords ordering is (x, y, z, w); fix the sign so w >= 0 for a
    // deterministic artifact.
    let sign = if v[3] < 0.0 { -1.0 } else { 1.0 };
    let q = Quaternion::new(sign * v[3], sign * v[0], sign * v[1], sign * v[2]);
    let rotation = UnitQuaternion::from_quaternion(q);
    let mean = RigidTransform::new(rotation, t_mean);

    let mut ss = 0.0;
    for rel in &rels {
        let dt = (rel.translation - mean.translation).norm();
        let dtheta = rel.rotation.angle_to(&mean.rotation);
        ss += dt * dt + (dtheta * RESIDUAL_LEVER_ARM_MM).powi(2);
    }
    let rms_residual = (ss / rels.len() as f64).sqrt();

    Ok(ReferenceCalibration {
        left_to_right: mean,
        rms_residual,
        pair_count: pairs.len(),
    })
}
