//! Alice-side qubit ensembles built from Bell-pair measurements: the
//! empirical density matrix with its finite-N fluctuation, the imbalance
//! count N_δ, and the pruning step that equalizes outcome counts exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{
    axis_eigenstates, measure_pair_bob, MeasurementAxis, Outcome, PureQubitState, TwoQubitState,
};
use crate::rng::RandomSource;

/// How an ensemble was produced. Carried for ground-truth scoring only;
/// distinguisher operations accept bare state lists and never see it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationLabel {
    basis_axis: MeasurementAxis,
    pruned: bool,
}

impl PreparationLabel {
    pub fn basis_axis(&self) -> MeasurementAxis {
        self.basis_axis
    }

    pub fn pruned(&self) -> bool {
        self.pruned
    }
}

/// Ordered collection of Alice's collapsed qubits plus its hidden
/// preparation label. `origin_indices` track which original pair each
/// qubit came from, so discard lists stay meaningful after pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    states: Vec<PureQubitState>,
    label: PreparationLabel,
    origin_indices: Vec<usize>,
}

impl Ensemble {
    fn from_parts(
        states: Vec<PureQubitState>,
        label: PreparationLabel,
        origin_indices: Vec<usize>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if states.len() != origin_indices.len() {
            return Err(Error::Misaligned {
                record: origin_indices.len(),
                ensemble: states.len(),
            });
        }
        debug_assert!(origin_indices.windows(2).all(|w| w[0] < w[1]));
        Ok(Self {
            states,
            label,
            origin_indices,
        })
    }

    /// Synthetic ideally balanced ensemble: `half` plus-eigenstates and
    /// `half` minus-eigenstates along `axis`, alternating. This is the state
    /// multiset a prune always produces, with the size fixed up front.
    pub fn balanced(axis: MeasurementAxis, half: usize) -> Result<Self> {
        if half == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let (plus, minus) = axis_eigenstates(&axis);
        let states = (0..2 * half)
            .map(|i| if i % 2 == 0 { plus } else { minus })
            .collect();
        Self::from_parts(
            states,
            PreparationLabel {
                basis_axis: axis,
                pruned: true,
            },
            (0..2 * half).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[PureQubitState] {
        &self.states
    }

    /// Hands the bare state list to a distinguisher, dropping the label.
    pub fn into_states(self) -> Vec<PureQubitState> {
        self.states
    }

    pub fn label(&self) -> &PreparationLabel {
        &self.label
    }

    pub fn origin_indices(&self) -> &[usize] {
        &self.origin_indices
    }
}

/// Bob's measurement results, aligned index-by-index with the ensemble he
/// prepared. For preparation axes in the x–z plane each outcome matches the
/// eigenstate Alice's qubit collapsed into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeRecord {
    outcomes: Vec<Outcome>,
}

impl OutcomeRecord {
    pub fn new(outcomes: Vec<Outcome>) -> Self {
        Self { outcomes }
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn count_plus(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|&&o| o == Outcome::Plus)
            .count()
    }
}

/// The signed excess of plus outcomes over half the count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Imbalance {
    n_delta: i64,
}

impl Imbalance {
    pub fn value(&self) -> i64 {
        self.n_delta
    }
}

/// Measures Bob's halves of `n` fresh Bell pairs along `bob_axis`. Returns
/// Alice's collapsed ensemble and Bob's private outcome record.
pub fn prepare_ensemble(
    n: usize,
    bob_axis: MeasurementAxis,
    rng: &mut RandomSource,
) -> Result<(Ensemble, OutcomeRecord)> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut states = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let pair = TwoQubitState::bell_phi_plus();
        let (outcome, alice) = measure_pair_bob(&pair, &bob_axis, rng);
        states.push(alice);
        outcomes.push(outcome);
    }
    let ensemble = Ensemble::from_parts(
        states,
        PreparationLabel {
            basis_axis: bob_axis,
            pruned: false,
        },
        (0..n).collect(),
    )?;
    Ok((ensemble, OutcomeRecord::new(outcomes)))
}

/// Prepares and balances in one step, re-preparing from fresh pairs when a
/// batch comes out all-equal and cannot balance (Bob holds as many pairs as
/// he needs). Returns the balanced ensemble with its discard list.
pub fn prepare_balanced_ensemble(
    n: usize,
    bob_axis: MeasurementAxis,
    rng: &mut RandomSource,
) -> Result<(Ensemble, Vec<usize>)> {
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let (ensemble, record) = prepare_ensemble(n, bob_axis, rng)?;
        match prune_to_balance(&ensemble, &record) {
            Ok(result) => return Ok(result),
            Err(Error::EmptyEnsemble) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::EmptyEnsemble)
}

/// 2×2 Hermitian trace-one matrix averaging the ensemble's projectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalDensityMatrix {
    entries: [[Complex64; 2]; 2],
}

impl EmpiricalDensityMatrix {
    pub fn from_states(states: &[PureQubitState]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let mut diag_up = 0.0;
        let mut diag_down = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for s in states {
            diag_up += s.amp_up().norm_sqr();
            diag_down += s.amp_down().norm_sqr();
            cross += s.amp_up() * s.amp_down().conj();
        }
        let n = states.len() as f64;
        let cross = cross / n;
        Ok(Self {
            entries: [
                [Complex64::new(diag_up / n, 0.0), cross],
                [cross.conj(), Complex64::new(diag_down / n, 0.0)],
            ],
        })
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row][col]
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0].re + self.entries[1][1].re
    }

    /// Eigenvalues of the Hermitian matrix, descending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.entries[0][0].re;
        let d = self.entries[1][1].re;
        let mid = (a + d) / 2.0;
        let radius = (((a - d) / 2.0).powi(2) + self.entries[0][1].norm_sqr()).sqrt();
        [mid + radius, mid - radius]
    }
}

/// Average projector (1/N) Σ |ψᵢ⟩⟨ψᵢ| of the ensemble.
pub fn empirical_density_matrix(ensemble: &Ensemble) -> EmpiricalDensityMatrix {
    EmpiricalDensityMatrix::from_states(ensemble.states())
        .expect("ensembles are non-empty by construction")
}

/// Counts how many states are bit-exactly the plus eigenstate, the minus
/// eigenstate, or neither, along `axis`. Collapse snaps states onto exact
/// eigenstates, so for ensembles prepared along `axis` the third count is
/// zero and the density matrix in this eigenbasis is the exact integer
/// ratio diag(plus, minus)/N.
pub fn eigenstate_counts(
    states: &[PureQubitState],
    axis: &MeasurementAxis,
) -> (usize, usize, usize) {
    let (plus, minus) = axis_eigenstates(axis);
    let mut counts = (0, 0, 0);
    for state in states {
        if *state == plus {
            counts.0 += 1;
        } else if *state == minus {
            counts.1 += 1;
        } else {
            counts.2 += 1;
        }
    }
    counts
}

/// N_δ: plus-outcome count minus half the total. Even counts split exactly;
/// for odd counts the excess is taken over ceil(N/2) so the result stays an
/// integer.
pub fn imbalance(record: &OutcomeRecord) -> Result<Imbalance> {
    if record.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = record.len() as i64;
    let plus = record.count_plus() as i64;
    Ok(Imbalance {
        n_delta: plus - (n + 1) / 2,
    })
}

/// Drops surplus-outcome qubits (highest origin indices first) until plus
/// and minus counts are exactly equal. Returns the balanced ensemble and the
/// discard list — the content of the classical message telling Alice which
/// qubits to exclude.
pub fn prune_to_balance(
    ensemble: &Ensemble,
    record: &OutcomeRecord,
) -> Result<(Ensemble, Vec<usize>)> {
    if ensemble.label.pruned {
        return Err(Error::AlreadyPruned);
    }
    if ensemble.len() != record.len() {
        return Err(Error::Misaligned {
            record: record.len(),
            ensemble: ensemble.len(),
        });
    }
    let plus = record.count_plus();
    let minus = record.len() - plus;
    let keep_each = plus.min(minus);
    if keep_each == 0 {
        return Err(Error::EmptyEnsemble);
    }

    let surplus_outcome = if plus > minus {
        Outcome::Plus
    } else {
        Outcome::Minus
    };
    let mut to_drop = plus.max(minus) - keep_each;
    let mut discard = Vec::with_capacity(to_drop);
    let mut keep = vec![true; ensemble.len()];
    for i in (0..ensemble.len()).rev() {
        if to_drop == 0 {
            break;
        }
        if record.outcomes()[i] == surplus_outcome {
            keep[i] = false;
            discard.push(ensemble.origin_indices[i]);
            to_drop -= 1;
        }
    }
    discard.reverse();

    let states = ensemble
        .states
        .iter()
        .zip(&keep)
        .filter_map(|(s, &k)| k.then_some(*s))
        .collect();
    let origins = ensemble
        .origin_indices
        .iter()
        .zip(&keep)
        .filter_map(|(&o, &k)| k.then_some(o))
        .collect();
    let balanced = Ensemble::from_parts(
        states,
        PreparationLabel {
            basis_axis: ensemble.label.basis_axis,
            pruned: true,
        },
        origins,
    )?;
    Ok((balanced, discard))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use num_traits::ToPrimitive;

    use crate::stats::{binomial_exact, chi_square_gof, expected_abs_imbalance, Histogram};

    fn record(signs: &[i64]) -> OutcomeRecord {
        OutcomeRecord::new(
            signs
                .iter()
                .map(|&s| if s > 0 { Outcome::Plus } else { Outcome::Minus })
                .collect(),
        )
    }

    #[test]
    fn prepare_z_states_match_record_exactly() {
        let mut rng = RandomSource::new(3, 0);
        let (ensemble, rec) = prepare_ensemble(4, MeasurementAxis::z(), &mut rng).unwrap();
        assert_eq!(ensemble.len(), 4);
        assert!(!ensemble.label().pruned());
        for (state, outcome) in ensemble.states().iter().zip(rec.outcomes()) {
            let expected = match outcome {
                Outcome::Plus => PureQubitState::up_z(),
                Outcome::Minus => PureQubitState::down_z(),
            };
            assert_eq!(*state, expected);
        }
    }

    #[test]
    fn prepare_x_states_are_x_eigenstates() {
        let mut rng = RandomSource::new(4, 0);
        let (ensemble, _) = prepare_ensemble(4, MeasurementAxis::x(), &mut rng).unwrap();
        for state in ensemble.states() {
            assert!(*state == PureQubitState::up_x() || *state == PureQubitState::down_x());
        }
    }

    #[test]
    fn prepare_rejects_zero_size() {
        let mut rng = RandomSource::new(5, 0);
        assert!(matches!(
            prepare_ensemble(0, MeasurementAxis::z(), &mut rng),
            Err(Error::EmptyEnsemble)
        ));
    }

    #[test]
    fn single_pair_collapse_frequency() {
        // 10^5 size-one preparations: fraction of |↑z⟩ inside the 3σ
        // binomial band around 1/2.
        let trials = 100_000;
        let mut up = 0u64;
        for t in 0..trials {
            let mut rng = RandomSource::new(6, t);
            let (ensemble, _) = prepare_ensemble(1, MeasurementAxis::z(), &mut rng).unwrap();
            if ensemble.states()[0] == PureQubitState::up_z() {
                up += 1;
            }
        }
        let freq = up as f64 / trials as f64;
        let sigma = 0.5 / (trials as f64).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * sigma, "frequency {freq}");
    }

    #[test]
    fn density_matrix_balanced_z_pair() {
        let dm = EmpiricalDensityMatrix::from_states(&[
            PureQubitState::up_z(),
            PureQubitState::down_z(),
        ])
        .unwrap();
        assert_eq!(dm.entry(0, 0).re, 0.5);
        assert_eq!(dm.entry(1, 1).re, 0.5);
        assert_eq!(dm.entry(0, 1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn density_matrix_three_up_one_down() {
        let dm = EmpiricalDensityMatrix::from_states(&[
            PureQubitState::up_z(),
            PureQubitState::up_z(),
            PureQubitState::up_z(),
            PureQubitState::down_z(),
        ])
        .unwrap();
        assert_eq!(dm.entry(0, 0).re, 0.75);
        assert_eq!(dm.entry(1, 1).re, 0.25);
    }

    #[test]
    fn density_matrix_x_pair_off_diagonals_cancel() {
        let dm = EmpiricalDensityMatrix::from_states(&[
            PureQubitState::up_x(),
            PureQubitState::down_x(),
        ])
        .unwrap();
        assert_eq!(dm.entry(0, 1), Complex64::new(0.0, 0.0));
        assert_eq!(dm.entry(1, 0), Complex64::new(0.0, 0.0));
        assert!((dm.entry(0, 0).re - 0.5).abs() < 1e-15);
        assert!((dm.entry(1, 1).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn density_matrix_invariants_on_random_ensembles() {
        let mut rng = RandomSource::new(8, 0);
        for axis in [
            MeasurementAxis::z(),
            MeasurementAxis::x(),
            MeasurementAxis::from_angles(1.0, 0.5),
        ] {
            let (ensemble, _) = prepare_ensemble(37, axis, &mut rng).unwrap();
            let dm = empirical_density_matrix(&ensemble);
            assert!((dm.trace() - 1.0).abs() < 1e-12);
            assert_eq!(dm.entry(1, 0), dm.entry(0, 1).conj());
            let [hi, lo] = dm.eigenvalues();
            assert!(hi >= lo);
            assert!(lo >= -1e-12);
        }
    }

    #[test]
    fn imbalance_examples() {
        assert_eq!(imbalance(&record(&[1, 1, -1, 1])).unwrap().value(), 1);
        assert_eq!(imbalance(&record(&[1, -1, 1, -1])).unwrap().value(), 0);
        assert!(matches!(
            imbalance(&OutcomeRecord::new(vec![])),
            Err(Error::EmptyEnsemble)
        ));
    }

    #[test]
    fn eq3_reconstruction_is_rationally_exact() {
        // z-prepared ensembles: density-matrix diagonal equals
        // 1/2 ± n_delta/N, checked through exact rational arithmetic.
        let mut rng = RandomSource::new(9, 0);
        for n in [2usize, 4, 6, 10, 16] {
            let (ensemble, rec) = prepare_ensemble(n, MeasurementAxis::z(), &mut rng).unwrap();
            let dm = empirical_density_matrix(&ensemble);
            let delta = imbalance(&rec).unwrap().value();
            let up_expected = Rational64::new(1, 2) + Rational64::new(delta, n as i64);
            let down_expected = Rational64::new(1, 2) - Rational64::new(delta, n as i64);
            assert_eq!(dm.entry(0, 0).re, up_expected.to_f64().unwrap());
            assert_eq!(dm.entry(1, 1).re, down_expected.to_f64().unwrap());
        }
    }

    #[test]
    fn x_preparation_moves_fluctuation_off_diagonal() {
        // even sizes: the n_delta/N form presumes an exact half split
        let mut rng = RandomSource::new(10, 0);
        for n in [4usize, 10, 32] {
            let (ensemble, rec) = prepare_ensemble(n, MeasurementAxis::x(), &mut rng).unwrap();
            let dm = empirical_density_matrix(&ensemble);
            let delta = imbalance(&rec).unwrap().value();
            // diagonal carries no fluctuation; the n_delta/N term shows up in
            // the real off-diagonal instead
            assert!((dm.entry(0, 0).re - 0.5).abs() < 1e-12);
            assert!((dm.entry(1, 1).re - 0.5).abs() < 1e-12);
            let expected = delta as f64 / n as f64;
            assert!((dm.entry(0, 1).re - expected).abs() < 1e-12);
            assert!(dm.entry(0, 1).im.abs() < 1e-15);
        }
    }

    #[test]
    fn prune_drops_highest_surplus_indices() {
        let mut rng = RandomSource::new(11, 0);
        // find a seed position with outcomes (+, +, -, +)
        let (ensemble, rec) = loop {
            let (e, r) = prepare_ensemble(4, MeasurementAxis::z(), &mut rng).unwrap();
            let signs: Vec<i64> = r.outcomes().iter().map(|o| o.value()).collect();
            if signs == [1, 1, -1, 1] {
                break (e, r);
            }
        };
        let (balanced, discard) = prune_to_balance(&ensemble, &rec).unwrap();
        assert_eq!(discard, vec![1, 3]);
        assert_eq!(balanced.len(), 2);
        assert_eq!(balanced.origin_indices(), &[0, 2]);
        assert!(balanced.label().pruned());
    }

    #[test]
    fn prune_balanced_input_is_noop() {
        let mut rng = RandomSource::new(12, 0);
        let (ensemble, rec) = loop {
            let (e, r) = prepare_ensemble(2, MeasurementAxis::z(), &mut rng).unwrap();
            if imbalance(&r).unwrap().value() == 0 {
                break (e, r);
            }
        };
        let (balanced, discard) = prune_to_balance(&ensemble, &rec).unwrap();
        assert!(discard.is_empty());
        assert_eq!(balanced.len(), 2);
    }

    #[test]
    fn prune_all_same_outcome_errors() {
        let mut rng = RandomSource::new(13, 0);
        let (ensemble, rec) = loop {
            let (e, r) = prepare_ensemble(4, MeasurementAxis::z(), &mut rng).unwrap();
            if r.count_plus() == 4 {
                break (e, r);
            }
        };
        assert!(matches!(
            prune_to_balance(&ensemble, &rec),
            Err(Error::EmptyEnsemble)
        ));
    }

    #[test]
    fn prune_twice_is_rejected() {
        let mut rng = RandomSource::new(14, 0);
        let (ensemble, rec) = loop {
            let (e, r) = prepare_ensemble(6, MeasurementAxis::z(), &mut rng).unwrap();
            let plus = r.count_plus();
            if plus > 0 && plus < 6 {
                break (e, r);
            }
        };
        let (balanced, _) = prune_to_balance(&ensemble, &rec).unwrap();
        let trimmed = OutcomeRecord::new(
            rec.outcomes()
                .iter()
                .copied()
                .take(balanced.len())
                .collect(),
        );
        assert!(matches!(
            prune_to_balance(&balanced, &trimmed),
            Err(Error::AlreadyPruned)
        ));
    }

    #[test]
    fn pruned_density_matrix_is_exactly_maximally_mixed() {
        // after pruning the two eigenstate counts are equal integers, so in
        // the preparation eigenbasis the density matrix is the exact ratio
        // diag(k, k)/2k = I/2
        let mut rng = RandomSource::new(15, 0);
        for axis in [MeasurementAxis::z(), MeasurementAxis::x()] {
            for _ in 0..20 {
                let (ensemble, rec) = prepare_ensemble(24, axis, &mut rng).unwrap();
                let Ok((balanced, _)) = prune_to_balance(&ensemble, &rec) else {
                    continue;
                };
                let (plus, minus, other) = eigenstate_counts(balanced.states(), &axis);
                assert_eq!(other, 0);
                assert_eq!(plus, minus);
                assert_eq!(plus as f64 / balanced.len() as f64, 0.5);

                let dm = empirical_density_matrix(&balanced);
                if axis == MeasurementAxis::z() {
                    // the z matrix shows the same exactness directly
                    assert_eq!(dm.entry(0, 0).re, 0.5);
                    assert_eq!(dm.entry(1, 1).re, 0.5);
                    assert_eq!(dm.entry(0, 1), Complex64::new(0.0, 0.0));
                } else {
                    // summed x projectors cancel to rounding noise in the
                    // z basis
                    assert!(dm.entry(0, 1).norm() < 1e-15);
                    assert!((dm.entry(0, 0).re - 0.5).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn balanced_constructor_counts() {
        let ensemble = Ensemble::balanced(MeasurementAxis::x(), 3).unwrap();
        assert_eq!(ensemble.len(), 6);
        assert!(ensemble.label().pruned());
        let ups = ensemble
            .states()
            .iter()
            .filter(|&&s| s == PureQubitState::up_x())
            .count();
        assert_eq!(ups, 3);
        assert!(Ensemble::balanced(MeasurementAxis::x(), 0).is_err());
    }

    #[test]
    fn imbalance_histogram_matches_shifted_binomial() {
        // chi-square goodness of fit at significance 0.001, N = 64,
        // 20k trials (the full N = 256 / 10^5 version runs in acceptance)
        let n = 64usize;
        let trials = 20_000u64;
        let mut hist = Histogram::new();
        for t in 0..trials {
            let mut rng = RandomSource::new(16, t);
            let (_, rec) = prepare_ensemble(n, MeasurementAxis::z(), &mut rng).unwrap();
            hist.record(imbalance(&rec).unwrap().value());
        }
        let dist = binomial_exact(n).unwrap();
        // n_delta = Σ/2: expected probabilities on the n_delta lattice
        let expected: Vec<(i64, f64)> = dist
            .support()
            .map(|s| (s / 2, dist.prob_sigma_f64(s)))
            .collect();
        let gof = chi_square_gof(&hist, &expected, 5.0).unwrap();
        assert!(
            gof.p_value >= 0.001,
            "chi-square p = {} (stat {} at {} df)",
            gof.p_value,
            gof.statistic,
            gof.degrees_of_freedom
        );
    }

    #[test]
    fn mean_abs_imbalance_tracks_oracle_and_scales_as_sqrt_n() {
        use crate::stats::scaling_fit;

        let mut points = Vec::new();
        let trials = 4000u64;
        for (i, n) in [64usize, 128, 256, 512, 1024].into_iter().enumerate() {
            let mut sum_abs = 0.0;
            for t in 0..trials {
                let mut rng = RandomSource::new(17 + i as u64, t);
                let (_, rec) = prepare_ensemble(n, MeasurementAxis::z(), &mut rng).unwrap();
                sum_abs += imbalance(&rec).unwrap().value().abs() as f64;
            }
            let mean_abs = sum_abs / trials as f64;
            let oracle = expected_abs_imbalance(n).unwrap();
            assert!(
                (mean_abs - oracle).abs() / oracle < 0.05,
                "n = {n}: Monte Carlo {mean_abs} vs oracle {oracle}"
            );
            points.push((n, mean_abs));
        }
        let fit = scaling_fit(&points).unwrap();
        assert!(
            fit.exponent > 0.45 && fit.exponent < 0.55,
            "exponent {}",
            fit.exponent
        );
    }
}
