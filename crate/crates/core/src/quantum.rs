//! Single- and two-qubit pure states, measurement axes, Born probabilities,
//! and projective collapse of shared Bell pairs.
//!
//! States are validated at construction, so the measurement operations below
//! never re-check normalization. Global phase is fixed by a canonical form
//! (`amp_up` real and non-negative, falling back to `amp_down` real positive
//! when `amp_up` vanishes), which makes collapsed states comparable bit for
//! bit against the eigenstates they came from.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Normalization deviation tolerated after construction.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Constructors renormalize inputs whose squared norm deviates by at most
/// this much and reject anything further out.
pub const RENORM_LIMIT: f64 = 1e-6;

/// Measurement outcome, the eigenvalue ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i64 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Normalized single-qubit state in the z basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubitState {
    amp_up: Complex64,
    amp_down: Complex64,
}

impl PureQubitState {
    /// Builds a state from raw amplitudes. Inputs already normalized to
    /// within [`NORM_TOLERANCE`] pass through untouched; deviations up to
    /// [`RENORM_LIMIT`] are renormalized; anything worse is rejected.
    pub fn new(amp_up: Complex64, amp_down: Complex64) -> Result<Self> {
        let norm_sqr = amp_up.norm_sqr() + amp_down.norm_sqr();
        let deviation = (norm_sqr - 1.0).abs();
        if deviation > RENORM_LIMIT {
            return Err(Error::InvalidState { norm_sqr });
        }
        if deviation > NORM_TOLERANCE {
            let norm = norm_sqr.sqrt();
            return Ok(Self {
                amp_up: amp_up / norm,
                amp_down: amp_down / norm,
            });
        }
        Ok(Self { amp_up, amp_down })
    }

    pub fn up_z() -> Self {
        Self {
            amp_up: Complex64::new(1.0, 0.0),
            amp_down: Complex64::new(0.0, 0.0),
        }
    }

    pub fn down_z() -> Self {
        Self {
            amp_up: Complex64::new(0.0, 0.0),
            amp_down: Complex64::new(1.0, 0.0),
        }
    }

    pub fn up_x() -> Self {
        Self {
            amp_up: Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            amp_down: Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn down_x() -> Self {
        Self {
            amp_up: Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            amp_down: Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn amp_up(&self) -> Complex64 {
        self.amp_up
    }

    pub fn amp_down(&self) -> Complex64 {
        self.amp_down
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amp_up.conj() * other.amp_up + self.amp_down.conj() * other.amp_down
    }

    /// Bloch vector (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) of the state.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let cross = self.amp_up.conj() * self.amp_down;
        [
            2.0 * cross.re,
            2.0 * cross.im,
            self.amp_up.norm_sqr() - self.amp_down.norm_sqr(),
        ]
    }

    /// Rotates the global phase into canonical form: `amp_up` real and
    /// non-negative, or `amp_down` real positive when `amp_up` is zero.
    /// Signed zeros are normalized so canonical states are unique bitwise.
    fn canonical(amp_up: Complex64, amp_down: Complex64) -> (Complex64, Complex64) {
        let anchor = if amp_up.norm_sqr() > 0.0 {
            amp_up
        } else {
            amp_down
        };
        let rotation = anchor.conj() / anchor.norm();
        let fix = |c: Complex64| Complex64::new(c.re + 0.0, c.im + 0.0);
        (fix(amp_up * rotation), fix(amp_down * rotation))
    }

    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self.amp_up - other.amp_up).norm() <= tol && (self.amp_down - other.amp_down).norm() <= tol
    }
}

/// Measurement direction as a unit Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementAxis {
    bloch: [f64; 3],
}

impl MeasurementAxis {
    pub fn new(bloch: [f64; 3]) -> Result<Self> {
        let norm_sqr: f64 = bloch.iter().map(|c| c * c).sum();
        let norm = norm_sqr.sqrt();
        if (norm - 1.0).abs() > RENORM_LIMIT {
            return Err(Error::InvalidAxis { norm });
        }
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Ok(Self {
                bloch: [bloch[0] / norm, bloch[1] / norm, bloch[2] / norm],
            });
        }
        Ok(Self { bloch })
    }

    pub fn x() -> Self {
        Self {
            bloch: [1.0, 0.0, 0.0],
        }
    }

    pub fn y() -> Self {
        Self {
            bloch: [0.0, 1.0, 0.0],
        }
    }

    pub fn z() -> Self {
        Self {
            bloch: [0.0, 0.0, 1.0],
        }
    }

    /// Axis from spherical angles: θ from +z, φ from +x in the x–y plane.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            bloch: [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ],
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            bloch: [-self.bloch[0], -self.bloch[1], -self.bloch[2]],
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    /// True when the axis has no y component, i.e. lies in the plane where
    /// Bell-pair collapse is perfectly correlated rather than mirrored.
    pub fn in_xz_plane(&self) -> bool {
        self.bloch[1] == 0.0
    }
}

/// Eigenstates (plus, minus) of the spin operator along `axis`.
///
/// Built from half-angle identities, sqrt((1 ± nz)/2), instead of trig calls
/// so the x and z axes come out with exact amplitudes.
pub fn axis_eigenstates(axis: &MeasurementAxis) -> (PureQubitState, PureQubitState) {
    let [nx, ny, nz] = axis.bloch;
    let cos_half = ((1.0 + nz) / 2.0).sqrt();
    let sin_half = ((1.0 - nz) / 2.0).sqrt();
    let transverse = (nx * nx + ny * ny).sqrt();
    let phase = if transverse > 0.0 {
        Complex64::new(nx / transverse, ny / transverse)
    } else {
        Complex64::new(1.0, 0.0)
    };

    let plus = PureQubitState::canonical(Complex64::new(cos_half, 0.0), sin_half * phase);
    let minus = PureQubitState::canonical(Complex64::new(sin_half, 0.0), -cos_half * phase);
    (
        PureQubitState {
            amp_up: plus.0,
            amp_down: plus.1,
        },
        PureQubitState {
            amp_up: minus.0,
            amp_down: minus.1,
        },
    )
}

/// Born probability of outcome +1 when measuring `state` along `axis`,
/// evaluated as (1 + n·r)/2 with r the state's Bloch vector. Equal to
/// |⟨plus|state⟩|² and exact for eigenstates and orthogonal axes.
pub fn born_single(state: &PureQubitState, axis: &MeasurementAxis) -> f64 {
    let r = state.bloch_vector();
    let dot = axis.bloch[0] * r[0] + axis.bloch[1] * r[1] + axis.bloch[2] * r[2];
    ((1.0 + dot) / 2.0).clamp(0.0, 1.0)
}

/// Projective measurement of a single qubit. The input state is consumed;
/// the returned state is exactly the eigenstate matching the outcome.
pub fn measure_single(
    state: PureQubitState,
    axis: &MeasurementAxis,
    rng: &mut RandomSource,
) -> (Outcome, PureQubitState) {
    let p_plus = born_single(&state, axis);
    let (plus, minus) = axis_eigenstates(axis);
    if rng.draw_unit() < p_plus {
        (Outcome::Plus, plus)
    } else {
        (Outcome::Minus, minus)
    }
}

/// Normalized two-qubit state. Amplitude order: (Alice ⊗ Bob) in the z basis,
/// indices (↑↑, ↑↓, ↓↑, ↓↓).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amps: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let deviation = (norm_sqr - 1.0).abs();
        if deviation > RENORM_LIMIT {
            return Err(Error::InvalidState { norm_sqr });
        }
        if deviation > NORM_TOLERANCE {
            let norm = norm_sqr.sqrt();
            return Ok(Self {
                amps: amps.map(|a| a / norm),
            });
        }
        Ok(Self { amps })
    }

    /// The shared pair (|↑↑⟩ + |↓↓⟩)/√2.
    pub fn bell_phi_plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            amps: [h, zero, zero, h],
        }
    }

    /// Unentangled product state |alice⟩ ⊗ |bob⟩.
    pub fn product(alice: &PureQubitState, bob: &PureQubitState) -> Self {
        Self {
            amps: [
                alice.amp_up() * bob.amp_up(),
                alice.amp_up() * bob.amp_down(),
                alice.amp_down() * bob.amp_up(),
                alice.amp_down() * bob.amp_down(),
            ],
        }
    }

    /// Amplitude for (Alice basis index, Bob basis index), 0 = ↑z, 1 = ↓z.
    pub fn amp(&self, alice: usize, bob: usize) -> Complex64 {
        self.amps[alice * 2 + bob]
    }

    /// Born probability of the joint outcome projecting onto
    /// |alice⟩ ⊗ |bob⟩.
    pub fn joint_probability(&self, alice: &PureQubitState, bob: &PureQubitState) -> f64 {
        let mut overlap = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                let alice_amp = if a == 0 {
                    alice.amp_up()
                } else {
                    alice.amp_down()
                };
                let bob_amp = if b == 0 { bob.amp_up() } else { bob.amp_down() };
                overlap += alice_amp.conj() * bob_amp.conj() * self.amp(a, b);
            }
        }
        overlap.norm_sqr().clamp(0.0, 1.0)
    }

    /// Alice's unnormalized conditional amplitudes after Bob projects his
    /// qubit onto `bob_state`.
    fn conditional_alice(&self, bob_state: &PureQubitState) -> (Complex64, Complex64) {
        let up = self.amp(0, 0) * bob_state.amp_up().conj()
            + self.amp(0, 1) * bob_state.amp_down().conj();
        let down = self.amp(1, 0) * bob_state.amp_up().conj()
            + self.amp(1, 1) * bob_state.amp_down().conj();
        (up, down)
    }
}

/// Bob measures his half of `pair` along `axis`. Returns Bob's outcome and
/// Alice's post-measurement conditional state.
///
/// The conditional state is snapped onto the exact axis eigenstate whenever
/// it matches one to within [`NORM_TOLERANCE`]; for the Bell pair this is
/// always the case, and the collapse result is bit-exact.
pub fn measure_pair_bob(
    pair: &TwoQubitState,
    axis: &MeasurementAxis,
    rng: &mut RandomSource,
) -> (Outcome, PureQubitState) {
    let (plus, minus) = axis_eigenstates(axis);
    let cond_plus = pair.conditional_alice(&plus);
    let p_plus = (cond_plus.0.norm_sqr() + cond_plus.1.norm_sqr()).clamp(0.0, 1.0);

    let (outcome, raw) = if rng.draw_unit() < p_plus {
        (Outcome::Plus, cond_plus)
    } else {
        (Outcome::Minus, pair.conditional_alice(&minus))
    };

    let norm = (raw.0.norm_sqr() + raw.1.norm_sqr()).sqrt();
    let (up, down) = PureQubitState::canonical(raw.0 / norm, raw.1 / norm);
    let alice = PureQubitState {
        amp_up: up,
        amp_down: down,
    };
    let alice = if alice.close_to(&plus, NORM_TOLERANCE) {
        plus
    } else if alice.close_to(&minus, NORM_TOLERANCE) {
        minus
    } else {
        alice
    };
    (outcome, alice)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn bell_state_amplitudes() {
        let bell = TwoQubitState::bell_phi_plus();
        assert_eq!(bell.amp(0, 0), c(H));
        assert_eq!(bell.amp(0, 1), c(0.0));
        assert_eq!(bell.amp(1, 0), c(0.0));
        assert_eq!(bell.amp(1, 1), c(H));
    }

    #[test]
    fn bell_joint_probabilities() {
        let bell = TwoQubitState::bell_phi_plus();
        let up = PureQubitState::up_z();
        let down = PureQubitState::down_z();
        assert!((bell.joint_probability(&up, &up) - 0.5).abs() < 1e-12);
        assert_eq!(bell.joint_probability(&up, &down), 0.0);
        assert!((bell.joint_probability(&down, &down) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn z_axis_eigenstates_are_exact() {
        let (plus, minus) = axis_eigenstates(&MeasurementAxis::z());
        assert_eq!(plus, PureQubitState::up_z());
        assert_eq!(minus, PureQubitState::down_z());
    }

    #[test]
    fn x_axis_eigenstates_are_exact() {
        let (plus, minus) = axis_eigenstates(&MeasurementAxis::x());
        assert_eq!(plus, PureQubitState::up_x());
        assert_eq!(minus, PureQubitState::down_x());
    }

    #[test]
    fn reversed_z_axis_swaps_eigenstates() {
        let (plus, minus) = axis_eigenstates(&MeasurementAxis::z().reversed());
        assert!(plus.close_to(&PureQubitState::down_z(), 1e-12));
        assert!(minus.close_to(&PureQubitState::up_z(), 1e-12));
    }

    #[test]
    fn general_axis_eigenstates_orthonormal() {
        let axis = MeasurementAxis::from_angles(1.1, 2.3);
        let (plus, minus) = axis_eigenstates(&axis);
        assert!((plus.inner(&plus).re - 1.0).abs() < 1e-12);
        assert!((minus.inner(&minus).re - 1.0).abs() < 1e-12);
        assert!(plus.inner(&minus).norm() < 1e-12);
        // canonical phase: amp_up real and non-negative
        assert!(plus.amp_up().im.abs() < 1e-15 && plus.amp_up().re >= 0.0);
        assert!(minus.amp_up().im.abs() < 1e-15 && minus.amp_up().re >= 0.0);
    }

    #[test]
    fn born_rule_examples() {
        assert_eq!(
            born_single(&PureQubitState::up_z(), &MeasurementAxis::z()),
            1.0
        );
        assert_eq!(
            born_single(&PureQubitState::up_z(), &MeasurementAxis::x()),
            0.5
        );
        assert_eq!(
            born_single(&PureQubitState::up_x(), &MeasurementAxis::x()),
            1.0
        );
    }

    #[test]
    fn born_probability_completeness() {
        let axis = MeasurementAxis::from_angles(0.7, 1.9);
        let state =
            PureQubitState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        let total = born_single(&state, &axis) + born_single(&state, &axis.reversed());
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenstate_measurement_is_deterministic() {
        let mut rng = RandomSource::new(9, 0);
        for _ in 0..200 {
            let (outcome, state) =
                measure_single(PureQubitState::up_z(), &MeasurementAxis::z(), &mut rng);
            assert_eq!(outcome, Outcome::Plus);
            assert_eq!(state, PureQubitState::up_z());

            let (outcome, state) =
                measure_single(PureQubitState::down_x(), &MeasurementAxis::x(), &mut rng);
            assert_eq!(outcome, Outcome::Minus);
            assert_eq!(state, PureQubitState::down_x());
        }
    }

    #[test]
    fn superposition_measurement_frequency() {
        // |↑x⟩ measured along z: exact binomial with p = 1/2; the observed
        // frequency must sit inside the 3σ band, σ = 1/(2√M).
        let trials = 100_000u64;
        let mut rng = RandomSource::new(2024, 0);
        let mut plus = 0u64;
        for _ in 0..trials {
            let (outcome, _) =
                measure_single(PureQubitState::up_x(), &MeasurementAxis::z(), &mut rng);
            if outcome == Outcome::Plus {
                plus += 1;
            }
        }
        let freq = plus as f64 / trials as f64;
        let sigma = 0.5 / (trials as f64).sqrt();
        assert!(
            (freq - 0.5).abs() <= 3.0 * sigma,
            "frequency {freq} outside 3σ band"
        );
    }

    #[test]
    fn collapse_returns_exact_eigenstate() {
        let mut rng = RandomSource::new(5, 3);
        let axis = MeasurementAxis::from_angles(0.4, 0.0);
        let (plus, minus) = axis_eigenstates(&axis);
        for _ in 0..100 {
            let (outcome, state) = measure_single(PureQubitState::up_z(), &axis, &mut rng);
            match outcome {
                Outcome::Plus => assert_eq!(state, plus),
                Outcome::Minus => assert_eq!(state, minus),
            }
        }
    }

    #[test]
    fn bell_pair_collapse_z() {
        let mut rng = RandomSource::new(11, 0);
        let mut seen_plus = false;
        let mut seen_minus = false;
        for _ in 0..200 {
            let bell = TwoQubitState::bell_phi_plus();
            let (outcome, alice) = measure_pair_bob(&bell, &MeasurementAxis::z(), &mut rng);
            match outcome {
                Outcome::Plus => {
                    assert_eq!(alice, PureQubitState::up_z());
                    seen_plus = true;
                }
                Outcome::Minus => {
                    assert_eq!(alice, PureQubitState::down_z());
                    seen_minus = true;
                }
            }
        }
        assert!(seen_plus && seen_minus);
    }

    #[test]
    fn bell_pair_collapse_x_bit_exact() {
        let mut rng = RandomSource::new(12, 0);
        for _ in 0..200 {
            let bell = TwoQubitState::bell_phi_plus();
            let (outcome, alice) = measure_pair_bob(&bell, &MeasurementAxis::x(), &mut rng);
            match outcome {
                Outcome::Plus => assert_eq!(alice, PureQubitState::up_x()),
                Outcome::Minus => assert_eq!(alice, PureQubitState::down_x()),
            }
        }
    }

    #[test]
    fn bell_pair_outcome_frequencies_balanced() {
        let mut rng = RandomSource::new(13, 0);
        let trials = 20_000;
        let mut plus = 0u64;
        for _ in 0..trials {
            let bell = TwoQubitState::bell_phi_plus();
            let (outcome, _) = measure_pair_bob(&bell, &MeasurementAxis::x(), &mut rng);
            if outcome == Outcome::Plus {
                plus += 1;
            }
        }
        let freq = plus as f64 / trials as f64;
        let sigma = 0.5 / (trials as f64).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * sigma);
    }

    #[test]
    fn product_state_measurement_deterministic() {
        let mut rng = RandomSource::new(14, 0);
        let pair = TwoQubitState::product(&PureQubitState::up_z(), &PureQubitState::up_z());
        for _ in 0..50 {
            let (outcome, alice) = measure_pair_bob(&pair, &MeasurementAxis::z(), &mut rng);
            assert_eq!(outcome, Outcome::Plus);
            assert_eq!(alice, PureQubitState::up_z());
        }
    }

    #[test]
    fn perfect_correlation_same_axis() {
        // Bob along z (or x), then Alice along the same axis: identical
        // outcomes in 100% of trials.
        for axis in [MeasurementAxis::z(), MeasurementAxis::x()] {
            let mut rng = RandomSource::new(15, 0);
            for _ in 0..500 {
                let bell = TwoQubitState::bell_phi_plus();
                let (bob, alice_state) = measure_pair_bob(&bell, &axis, &mut rng);
                let (alice, _) = measure_single(alice_state, &axis, &mut rng);
                assert_eq!(bob, alice);
            }
        }
    }

    #[test]
    fn rejects_unnormalized_state() {
        let err = PureQubitState::new(c(1.0), c(1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidState { .. }));
    }

    #[test]
    fn renormalizes_small_drift() {
        let state = PureQubitState::new(c(1.0 + 3e-7), c(0.0)).unwrap();
        assert!((state.amp_up().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_unit_axis() {
        let err = MeasurementAxis::new([0.0, 0.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidAxis { .. }));
    }

    #[test]
    fn determinism_across_identical_sources() {
        let run = |seed, stream| {
            let mut rng = RandomSource::new(seed, stream);
            (0..64)
                .map(|_| {
                    let bell = TwoQubitState::bell_phi_plus();
                    measure_pair_bob(&bell, &MeasurementAxis::x(), &mut rng).0
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(77, 5), run(77, 5));
        assert_ne!(run(77, 5), run(77, 6));
    }
}
