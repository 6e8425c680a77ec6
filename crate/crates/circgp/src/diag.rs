//! Convergence diagnostics: univariate potential scale reduction factors
//! (with a (cos, sin) embedding for circular parameters) and the
//! Brooks–Gelman multivariate PSRF.
//!
//! With m chains of length n, chain variances averaged into W and the
//! between-chain variance of the means B/n,
//!
//! ```text
//! PSRF  = √( ((n−1)/n · W + (1 + 1/m) · B/n) / W )
//! MPSRF = √( (n−1)/n + ((m+1)/m) · λ_max(W⁻¹ B/n) )
//! ```
//!
//! Identical chains (zero between-chain variance) report exactly 1 by
//! convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_shapes(n_chains: usize, lens: &[usize]) -> Result<usize> {
    if n_chains < 2 {
        return Err(Error::Data(format!(
            "convergence diagnostics need at least 2 chains, got {n_chains}"
        )));
    }
    let n = lens[0];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::Data("chains must have equal lengths".into()));
    }
    if n < 10 {
        return Err(Error::Data(format!(
            "chains must hold at least 10 draws for a meaningful PSRF, got {n}"
        )));
    }
    Ok(n)
}

/// Univariate PSRF of one scalar parameter across chains.
///
/// Returns exactly 1.0 when the chain means coincide (identical chains);
/// returns +∞ when the chains are internally constant but disagree.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    let lens: Vec<usize> = chains.iter().map(|c| c.len()).collect();
    let n = check_shapes(m, &lens)?;
    let nf = n as f64;
    let mf = m as f64;

    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / mf;
    let b_over_n =
        means.iter().map(|&mu| (mu - grand) * (mu - grand)).sum::<f64>() / (mf - 1.0);
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| c.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / mf;

    if b_over_n == 0.0 {
        return Ok(1.0);
    }
    if w == 0.0 {
        return Ok(f64::INFINITY);
    }
    let var_plus = (nf - 1.0) / nf * w + (1.0 + 1.0 / mf) * b_over_n;
    Ok((var_plus / w).sqrt())
}

/// PSRF for a circular parameter: the chains are embedded as
/// (cos θ, sin θ) series and the larger of the two component PSRFs is
/// reported, so a parameter straddling the 0/2π cut is not flagged as
/// unconverged by its linear representation.
pub fn psrf_circular(chains: &[Vec<f64>]) -> Result<f64> {
    let cos_chains: Vec<Vec<f64>> =
        chains.iter().map(|c| c.iter().map(|&a| a.cos()).collect()).collect();
    let sin_chains: Vec<Vec<f64>> =
        chains.iter().map(|c| c.iter().map(|&a| a.sin()).collect()).collect();
    Ok(psrf(&cos_chains)?.max(psrf(&sin_chains)?))
}

/// Brooks–Gelman multivariate PSRF over chains of p-dimensional draws
/// (`chains[j][it][dim]`), via the largest eigenvalue of `W⁻¹B/n`.
pub fn mpsrf(chains: &[Vec<Vec<f64>>]) -> Result<f64> {
    let m = chains.len();
    let lens: Vec<usize> = chains.iter().map(|c| c.len()).collect();
    let n = check_shapes(m, &lens)?;
    let p = chains[0][0].len();
    if p < 2 {
        return Err(Error::Data(format!(
            "multivariate PSRF needs dimension ≥ 2, got {p}"
        )));
    }
    if chains.iter().any(|c| c.iter().any(|row| row.len() != p)) {
        return Err(Error::Data("draws must share one dimension across chains".into()));
    }
    let nf = n as f64;
    let mf = m as f64;

    let means: Vec<DVector<f64>> = chains
        .iter()
        .map(|c| {
            let mut mu = DVector::zeros(p);
            for row in c {
                mu += DVector::from_row_slice(row);
            }
            mu / nf
        })
        .collect();
    let grand = means.iter().fold(DVector::zeros(p), |acc, mu| acc + mu) / mf;

    let mut w = DMatrix::zeros(p, p);
    for (c, mu) in chains.iter().zip(&means) {
        for row in c {
            let d = DVector::from_row_slice(row) - mu;
            w += &d * d.transpose();
        }
    }
    w /= mf * (nf - 1.0);

    let mut b_over_n = DMatrix::zeros(p, p);
    for mu in &means {
        let d = mu - &grand;
        b_over_n += &d * d.transpose();
    }
    b_over_n /= mf - 1.0;

    if b_over_n.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    let l = crate::gauss::factorize(&w).map_err(|e| {
        Error::Numeric(format!("within-chain covariance is singular: {e}"))
    })?;
    // λ_max of W⁻¹B/n = λ_max of L⁻¹ (B/n) L⁻ᵀ, which is symmetric.
    let singular = || Error::Numeric("within-chain covariance is singular".into());
    let x = l.lower().solve_lower_triangular(&b_over_n).ok_or_else(singular)?;
    let msym = l.lower().solve_lower_triangular(&x.transpose()).ok_or_else(singular)?;
    let msym = (&msym + msym.transpose()) * 0.5;
    let lambda_max = msym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        .max(0.0);
    Ok(((nf - 1.0) / nf + (mf + 1.0) / mf * lambda_max).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn normal_chain(n: usize, mean: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| mean + rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn identical_chains_report_exactly_one() {
        let c = normal_chain(100, 0.0, 1);
        assert_eq!(psrf(&[c.clone(), c.clone()]).unwrap(), 1.0);
        let multi: Vec<Vec<f64>> = c.windows(2).map(|w| w.to_vec()).collect();
        assert_eq!(mpsrf(&[multi.clone(), multi]).unwrap(), 1.0);
    }

    #[test]
    fn iid_chains_sit_near_one() {
        let chains = vec![
            normal_chain(10_000, 0.0, 2),
            normal_chain(10_000, 0.0, 3),
            normal_chain(10_000, 0.0, 4),
        ];
        let r = psrf(&chains).unwrap();
        assert!((0.99..1.05).contains(&r), "iid PSRF {r}");
    }

    #[test]
    fn disjoint_chains_are_flagged() {
        let chains = vec![normal_chain(500, -10.0, 5), normal_chain(500, 10.0, 6)];
        let r = psrf(&chains).unwrap();
        assert!(r > 1.2, "separated chains PSRF {r} should be far above 1");
    }

    #[test]
    fn constant_disagreeing_chains_diverge() {
        let r = psrf(&[vec![1.0; 20], vec![2.0; 20]]).unwrap();
        assert!(r.is_infinite());
    }

    /// A chain straddling the wrap cut has its values split between 0+
    /// and 2π−, which inflates the linear within-chain variance to ~π²
    /// and masks genuine divergence from a second chain sitting at π.
    /// The (cos, sin) embedding is unaffected by the cut and flags it.
    #[test]
    fn circular_embedding_sees_through_the_wrap_cut() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut normal = |m: f64| -> Vec<f64> {
            (0..2000)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    crate::circ::wrap_raw(m + 0.01 * z)
                })
                .collect()
        };
        let at_cut = normal(0.0);
        let at_pi = normal(std::f64::consts::PI);
        let linear = psrf(&[at_cut.clone(), at_pi.clone()]).unwrap();
        let circular = psrf_circular(&[at_cut.clone(), at_pi]).unwrap();
        assert!(linear < 1.2, "linear PSRF {linear} is blinded by the inflated W");
        assert!(circular > 2.0, "circular PSRF {circular} should flag the divergence");

        // And two independent straddling chains from the same wrapped
        // distribution still read as converged.
        let again = normal(0.0);
        let same = psrf_circular(&[at_cut, again]).unwrap();
        assert!(same < 1.05, "matching straddling chains give {same}");
    }

    #[test]
    fn multivariate_iid_chains_sit_near_one() {
        let mut seed = 10;
        let mut chain = || {
            seed += 1;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            (0..5000)
                .map(|_| {
                    vec![
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ]
                })
                .collect::<Vec<_>>()
        };
        let r = mpsrf(&[chain(), chain()]).unwrap();
        assert!((0.9..1.1).contains(&r), "iid MPSRF {r}");
    }

    #[test]
    fn multivariate_separated_chains_are_flagged() {
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        let mut chain = |offset: f64| {
            (0..500)
                .map(|_| {
                    vec![
                        offset + rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ]
                })
                .collect::<Vec<_>>()
        };
        let r = mpsrf(&[chain(-5.0), chain(5.0)]).unwrap();
        assert!(r > 1.5, "separated MPSRF {r}");
    }

    #[test]
    fn singular_within_chain_covariance_is_an_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let mut chain = |c: f64| {
            (0..50)
                .map(|_| vec![rng.sample::<f64, _>(StandardNormal), c])
                .collect::<Vec<_>>()
        };
        // Second coordinate constant within each chain but different
        // across chains: W singular while B > 0.
        let err = mpsrf(&[chain(0.0), chain(1.0)]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn shape_errors_are_reported() {
        assert!(psrf(&[vec![0.0; 50]]).is_err());
        assert!(psrf(&[vec![0.0; 50], vec![0.0; 49]]).is_err());
        assert!(psrf(&[vec![0.0; 5], vec![0.0; 5]]).is_err());
        let tiny = vec![vec![vec![0.0]; 50]; 2];
        assert!(mpsrf(&tiny).is_err());
    }
}
