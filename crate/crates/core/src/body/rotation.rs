//! Continuous 6-D rotation representation: the first two columns of a
//! rotation matrix, re-orthonormalized by Gram–Schmidt on decode.

use nalgebra::Matrix3;

use super::BodyError;
use crate::geometry::Vec3;

pub type Rot6 = [f64; 6];

pub const IDENTITY_6D: Rot6 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

const DEGENERATE_EPS: f64 = 1e-12;

pub fn rot6d_to_matrix(r: &Rot6) -> Result<Matrix3<f64>, BodyError> {
    let a1 = Vec3::new(r[0], r[1], r[2]);
    let a2 = Vec3::new(r[3], r[4], r[5]);
    let n1 = a1.norm();
    if n1 < DEGENERATE_EPS {
        return Err(BodyError::DegenerateRotation6D);
    }
    let b1 = a1 / n1;
    let u = a2 - b1 * b1.dot(&a2);
    let nu = u.norm();
    if nu < DEGENERATE_EPS * a2.norm().max(1.0) {
        return Err(BodyError::DegenerateRotation6D);
    }
    let b2 = u / nu;
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

pub fn matrix_to_rot6d(m: &Matrix3<f64>) -> Result<Rot6, BodyError> {
    let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
    if ortho > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
        return Err(BodyError::NotARotation);
    }
    Ok([m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]])
}

/// Rotation by `angle` radians about a unit `axis`.
pub fn axis_angle(axis: Vec3, angle: f64) -> Matrix3<f64> {
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_cases() {
        assert_eq!(rot6d_to_matrix(&IDENTITY_6D).unwrap(), Matrix3::identity());
        assert_eq!(rot6d_to_matrix(&[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]).unwrap(), Matrix3::identity());
        assert_eq!(matrix_to_rot6d(&Matrix3::identity()).unwrap(), IDENTITY_6D);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = matrix_to_rot6d(&axis_angle(Vec3::z(), FRAC_PI_2)).unwrap();
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            rot6d_to_matrix(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            Err(BodyError::DegenerateRotation6D)
        ));
        assert!(matches!(
            matrix_to_rot6d(&(Matrix3::identity() * 2.0)),
            Err(BodyError::NotARotation)
        ));
        let reflection = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(matrix_to_rot6d(&reflection), Err(BodyError::NotARotation)));
    }

    proptest! {
        #[test]
        fn round_trip(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0, angle in -3.1f64..3.1) {
            prop_assume!(ax * ax + ay * ay + az * az > 1e-3);
            let m = axis_angle(Vec3::new(ax, ay, az), angle);
            let back = rot6d_to_matrix(&matrix_to_rot6d(&m).unwrap()).unwrap();
            prop_assert!((back - m).abs().max() < 1e-12);
            prop_assert!((back.determinant() - 1.0).abs() < 1e-12);
        }
    }
}
