use super::params::TireParams;

/// Magic Formula lateral force for slip angle `alpha` [rad] at vertical load `f_z` [N].
///
/// `F_y = D sin(C atan(B a - E (B a - atan(B a))))` with `D = D_scale * F_z`.
pub fn pacejka_lateral_force(alpha: f64, tire: &TireParams, f_z: f64) -> f64 {
    let d = tire.d_scale * f_z;
    let b_alpha = tire.b * alpha;
    let inner = b_alpha - tire.e * (b_alpha - b_alpha.atan());
    d * (tire.c * inner.atan()).sin()
}

/// Friction-ellipse reduction of lateral force under longitudinal load.
///
/// Returns `sqrt(1 - (F_x / mu_F_z)^2)`, saturating at zero once the
/// longitudinal force alone uses the whole friction budget.
pub fn combined_slip_scale(f_x: f64, mu_f_z: f64) -> f64 {
    let ratio = f_x / mu_f_z;
    (1.0 - ratio * ratio).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FZ_F: f64 = 10376.0;

    #[test]
    fn zero_slip_gives_zero_force() {
        assert_eq!(pacejka_lateral_force(0.0, &TireParams::FRONT, FZ_F), 0.0);
        assert_eq!(pacejka_lateral_force(0.0, &TireParams::REAR, 14345.2), 0.0);
    }

    // Values below were evaluated independently at 30 significant digits (mpmath).
    #[test]
    fn front_tire_at_one_tenth_radian() {
        let f = pacejka_lateral_force(0.1, &TireParams::FRONT, FZ_F);
        let d = 1.1 * FZ_F;
        assert!((f / d - 0.900_681_395_554_739).abs() < 1e-12, "{}", f / d);
        assert!((f - 10_280.017_176_303_57).abs() < 1e-8, "{f}");
    }

    #[test]
    fn rear_tire_at_five_hundredths() {
        let f = pacejka_lateral_force(0.05, &TireParams::REAR, 1.0);
        assert!((f / 2.1 - 0.978_457_130_767_300).abs() < 1e-12, "{}", f / 2.1);
    }

    #[test]
    fn combined_slip_examples() {
        assert_eq!(combined_slip_scale(0.0, 100.0), 1.0);
        assert_eq!(combined_slip_scale(100.0, 100.0), 0.0);
        assert!((combined_slip_scale(60.0, 100.0) - 0.8).abs() < 1e-12);
        assert_eq!(combined_slip_scale(-250.0, 100.0), 0.0);
    }

    proptest! {
        #[test]
        fn force_is_odd(alpha in -1.0f64..1.0) {
            for tire in [TireParams::FRONT, TireParams::REAR] {
                let pos = pacejka_lateral_force(alpha, &tire, FZ_F);
                let neg = pacejka_lateral_force(-alpha, &tire, FZ_F);
                prop_assert_eq!(pos, -neg);
            }
        }

        #[test]
        fn combined_scale_in_unit_interval(fx in -1e5f64..1e5, mu in 1.0f64..1e5) {
            let s = combined_slip_scale(fx, mu);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
