//! Clebsch-Gordan coefficients (Condon-Shortley phase) via the Racah formula.

fn doubled(x: f64) -> Option<i64> {
    let d = 2.0 * x;
    ((d - d.round()).abs() < 1e-9 && d.is_finite()).then(|| d.round() as i64)
}

fn factorial(n: i64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// ⟨j₁ m₁; j₂ m₂ | J M⟩. Returns 0 whenever a selection rule is violated or
/// an argument is not a half-integer.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    let (Some(tj1), Some(tm1), Some(tj2), Some(tm2), Some(tj), Some(tm)) =
        (doubled(j1), doubled(m1), doubled(j2), doubled(m2), doubled(j), doubled(m))
    else {
        return 0.0;
    };
    cg_doubled(tj1, tm1, tj2, tm2, tj, tm)
}

fn cg_doubled(tj1: i64, tm1: i64, tj2: i64, tm2: i64, tj: i64, tm: i64) -> f64 {
    if tj1 < 0 || tj2 < 0 || tj < 0 {
        return 0.0;
    }
    if tm1 + tm2 != tm || tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    // projections must share parity with their j
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj + tm) % 2 != 0 {
        return 0.0;
    }
    // triangle rule and integer j1 + j2 + J
    if tj > tj1 + tj2 || tj < (tj1 - tj2).abs() || (tj1 + tj2 + tj) % 2 != 0 {
        return 0.0;
    }
    let h = |x: i64| x / 2;
    let a = h(tj1 + tj2 - tj);
    let b = h(tj1 - tm1);
    let c = h(tj2 + tm2);
    let d = h(tj - tj2 + tm1);
    let e = h(tj - tj1 - tm2);
    let triangle = factorial(h(tj + tj1 - tj2)) * factorial(h(tj - tj1 + tj2)) * factorial(a)
        / factorial(h(tj1 + tj2 + tj) + 1);
    let proj = factorial(h(tj + tm))
        * factorial(h(tj - tm))
        * factorial(b)
        * factorial(h(tj1 + tm1))
        * factorial(h(tj2 - tm2))
        * factorial(c);
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign
            / (factorial(k)
                * factorial(a - k)
                * factorial(b - k)
                * factorial(c - k)
                * factorial(d + k)
                * factorial(e + k));
    }
    ((tj + 1) as f64 * triangle).sqrt() * proj.sqrt() * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn pi_transition_zero_to_zero_forbidden() {
        assert_eq!(clebsch_gordan(2.0, 0.0, 1.0, 0.0, 2.0, 0.0), 0.0);
    }

    #[test]
    fn singlet() {
        let c = clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0.0, 0.0);
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let c = clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0.0, 0.0);
        assert!((c + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(clebsch_gordan(2.0, 1.0, 1.0, 1.0, 2.0, 1.0), 0.0); // M ≠ m1 + m2
        assert_eq!(clebsch_gordan(2.0, 2.0, 1.0, 1.0, 4.0, 3.0), 0.0); // triangle
        assert_eq!(clebsch_gordan(2.0, 0.5, 1.0, 0.5, 2.0, 1.0), 0.0); // parity
        assert_eq!(clebsch_gordan(2.0, 0.3, 1.0, 0.0, 2.0, 0.3), 0.0); // not half-integer
    }

    /// Independent oracle: build |J M⟩ in the product basis by taking the
    /// top state with Condon-Shortley phase and lowering with J₋.
    fn numeric_cg_table(tj1: i64, tj2: i64) -> Vec<(i64, i64, i64, i64, f64)> {
        let d1 = (tj1 + 1) as usize;
        let d2 = (tj2 + 1) as usize;
        let lower = |tj: i64| {
            let dim = (tj + 1) as usize;
            let j = tj as f64 / 2.0;
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..dim - 1 {
                let mm = j - k as f64;
                m[(k + 1, k)] = (j * (j + 1.0) - mm * (mm - 1.0)).sqrt();
            }
            m
        };
        let jm = lower(tj1).kronecker(&DMatrix::identity(d2, d2)) + DMatrix::identity(d1, d1).kronecker(&lower(tj2));
        let jz_diag: Vec<f64> = (0..d1 * d2)
            .map(|idx| (tj1 as f64 / 2.0 - (idx / d2) as f64) + (tj2 as f64 / 2.0 - (idx % d2) as f64))
            .collect();
        let jplus = jm.transpose();
        let jsq = &jplus * &jm + DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d1 * d2,
            jz_diag.iter().map(|m| m * m - m),
        ));
        let mut out = Vec::new();
        let mut tj = tj1 + tj2;
        while tj >= (tj1 - tj2).abs() {
            let jval = tj as f64 / 2.0;
            // highest-weight vector: J² eigenvalue j(j+1) inside the M = J block,
            // where it is non-degenerate
            let block: Vec<usize> = (0..d1 * d2).filter(|&i| (jz_diag[i] - jval).abs() < 1e-9).collect();
            let sub = DMatrix::from_fn(block.len(), block.len(), |r, c| jsq[(block[r], block[c])]);
            let eig = sub.symmetric_eigen();
            let k = (0..block.len())
                .find(|&k| (eig.eigenvalues[k] - jval * (jval + 1.0)).abs() < 1e-8)
                .expect("highest weight state");
            let mut v = nalgebra::DVector::<f64>::zeros(d1 * d2);
            for (r, &i) in block.iter().enumerate() {
                v[i] = eig.eigenvectors[(r, k)];
            }
            // phase: ⟨j1 j1; j2 (J − j1) | J J⟩ > 0
            let m2 = jval - tj1 as f64 / 2.0;
            let idx = (tj2 as f64 / 2.0 - m2).round() as usize;
            if v[idx] < 0.0 {
                v = -v;
            }
            let mut tm = tj;
            loop {
                for a in 0..d1 {
                    for b in 0..d2 {
                        let tm1 = tj1 - 2 * a as i64;
                        let tm2 = tj2 - 2 * b as i64;
                        if tm1 + tm2 == tm {
                            out.push((tj, tm, tm1, tm2, v[a * d2 + b]));
                        }
                    }
                }
                if tm == -tj {
                    break;
                }
                v = &jm * v;
                v /= v.norm();
                tm -= 2;
            }
            tj -= 2;
        }
        out
    }

    #[test]
    fn racah_matches_lowering_oracle() {
        for (tj1, tj2) in [(4, 2), (2, 2), (3, 1), (4, 4)] {
            for (tj, tm, tm1, tm2, want) in numeric_cg_table(tj1, tj2) {
                let got = cg_doubled(tj1, tm1, tj2, tm2, tj, tm);
                assert!((got - want).abs() < 1e-10, "j1={tj1}/2 j2={tj2}/2 J={tj}/2 M={tm}/2 m1={tm1}/2: {got} vs {want}");
            }
        }
    }
}
