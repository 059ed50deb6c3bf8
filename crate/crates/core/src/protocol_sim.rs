//! Monte Carlo run of the honest protocol: issuance, threshold detection in
//! the challenge basis, and the bank's check.
//!
//! Each detector clicks with probability `1 − exp(−η_d·intensity)`,
//! independently of the other. No dark counts, unit channel transmission.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default width of the no-click window in binomial standard deviations.
pub const DEFAULT_KAPPA: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("length mismatch: card has {expected} positions, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardInstance {
    pub serial: u64,
    pub key: Vec<u8>,
    pub basis: Vec<u8>,
    pub mu: f64,
}

impl CardInstance {
    pub fn len(&self) -> usize {
        self.key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Bit(u8),
    NoClick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeTranscript {
    pub challenge: Vec<u8>,
    pub answers: Vec<Answer>,
    pub double_clicks: usize,
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

fn check_mu(mu: f64) -> Result<(), ProtocolError> {
    if mu.is_finite() && mu >= 0.0 {
        Ok(())
    } else {
        Err(ProtocolError::Domain(format!("mu = {mu} must be finite and non-negative")))
    }
}

/// Mints a card with uniformly random key and basis bits.
pub fn issue_card(n: usize, mu: f64, seed: u64) -> Result<CardInstance, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::Domain("card length must be at least 1".into()));
    }
    check_mu(mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let serial = rng.gen();
    let key = random_bits(&mut rng, n);
    let basis = random_bits(&mut rng, n);
    Ok(CardInstance { serial, key, basis, mu })
}

/// Uniformly random challenge bits, one per position.
pub fn random_challenge(n: usize, seed: u64) -> Vec<u8> {
    random_bits(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Honest terminal: measures every position in the challenge basis.
pub fn measure_honest(
    card: &CardInstance,
    challenge: &[u8],
    eta_d: f64,
    seed: u64,
) -> Result<ChallengeTranscript, ProtocolError> {
    if challenge.len() != card.len() {
        return Err(ProtocolError::LengthMismatch { expected: card.len(), got: challenge.len() });
    }
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(ProtocolError::Domain(format!("eta_d = {eta_d} must lie in [0, 1]")));
    }
    check_mu(card.mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_full = -(-eta_d * card.mu).exp_m1();
    let p_half = -(-eta_d * card.mu / 2.0).exp_m1();
    let mut double_clicks = 0;
    let answers = (0..card.len())
        .map(|j| {
            let clicks = if challenge[j] == card.basis[j] {
                let mut c = [false; 2];
                c[card.key[j] as usize] = rng.gen_bool(p_full);
                c
            } else {
                [rng.gen_bool(p_half), rng.gen_bool(p_half)]
            };
            match clicks {
                [false, false] => Answer::NoClick,
                [true, false] => Answer::Bit(0),
                [false, true] => Answer::Bit(1),
                [true, true] => {
                    double_clicks += 1;
                    Answer::Bit(rng.gen_range(0..2u8))
                }
            }
        })
        .collect();
    Ok(ChallengeTranscript { challenge: challenge.to_vec(), answers, double_clicks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    /// Answered positions whose challenge matched the basis but whose bit
    /// differs from the key.
    pub wrong_answers: usize,
    pub no_clicks: usize,
    pub expected_no_clicks: f64,
    pub window: f64,
}

/// Accepts when every answered basis-matching position carries the key bit
/// and the no-click count lies within `κ·√(f_h(1−f_h)n)` of `f_h·n`, with
/// `f_h = exp(−η_d μ)`.
pub fn bank_verify(
    card: &CardInstance,
    transcript: &ChallengeTranscript,
    eta_d: f64,
    kappa: f64,
) -> Result<Verdict, ProtocolError> {
    let n = card.len();
    if transcript.answers.len() != n || transcript.challenge.len() != n {
        return Err(ProtocolError::LengthMismatch { expected: n, got: transcript.answers.len() });
    }
    let mut wrong_answers = 0;
    let mut no_clicks = 0;
    for j in 0..n {
        match transcript.answers[j] {
            Answer::NoClick => no_clicks += 1,
            Answer::Bit(b) => {
                if transcript.challenge[j] == card.basis[j] && b != card.key[j] {
                    wrong_answers += 1;
                }
            }
        }
    }
    let f_h = (-eta_d * card.mu).exp();
    let expected = f_h * n as f64;
    let window = crate::security::acceptance_window(f_h, n, kappa);
    let accepted = wrong_answers == 0 && (no_clicks as f64 - expected).abs() <= window;
    Ok(Verdict { accepted, wrong_answers, no_clicks, expected_no_clicks: expected, window })
}

/// Aggregate counts of one transcript against its card.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TranscriptStats {
    pub positions: usize,
    pub no_clicks: usize,
    pub double_clicks: usize,
    pub matched_answers: usize,
    pub matched_errors: usize,
    pub mismatched_answers: usize,
    pub mismatched_ones: usize,
}

impl TranscriptStats {
    pub fn no_click_fraction(&self) -> f64 {
        self.no_clicks as f64 / self.positions as f64
    }

    pub fn matched_error_rate(&self) -> f64 {
        if self.matched_answers == 0 {
            0.0
        } else {
            self.matched_errors as f64 / self.matched_answers as f64
        }
    }
}

pub fn transcript_stats(card: &CardInstance, transcript: &ChallengeTranscript) -> TranscriptStats {
    let mut s = TranscriptStats { positions: card.len(), double_clicks: transcript.double_clicks, ..Default::default() };
    for (j, a) in transcript.answers.iter().enumerate() {
        let matched = transcript.challenge[j] == card.basis[j];
        match (a, matched) {
            (Answer::NoClick, _) => s.no_clicks += 1,
            (Answer::Bit(b), true) => {
                s.matched_answers += 1;
                if *b != card.key[j] {
                    s.matched_errors += 1;
                }
            }
            (Answer::Bit(b), false) => {
                s.mismatched_answers += 1;
                s.mismatched_ones += *b as usize;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn issuance_is_seed_deterministic() {
        assert_eq!(issue_card(4, 0.5, 7).unwrap(), issue_card(4, 0.5, 7).unwrap());
        let a = issue_card(256, 0.5, 1).unwrap();
        let b = issue_card(256, 0.5, 2).unwrap();
        assert_ne!((a.key, a.basis), (b.key, b.basis));
        assert!(issue_card(0, 0.5, 1).is_err());
        assert!(issue_card(3, -1.0, 1).is_err());
    }

    #[test]
    fn vacuum_gives_no_clicks() {
        let card = issue_card(1000, 0.0, 3).unwrap();
        let t = measure_honest(&card, &random_challenge(1000, 4), 1.0, 5).unwrap();
        assert!(t.answers.iter().all(|a| *a == Answer::NoClick));
    }

    #[test]
    fn bright_pulses_answer_correctly() {
        let card = issue_card(1000, 60.0, 3).unwrap();
        let t = measure_honest(&card, &card.basis, 1.0, 5).unwrap();
        for (j, a) in t.answers.iter().enumerate() {
            assert_eq!(*a, Answer::Bit(card.key[j]));
        }
    }

    #[test]
    fn no_click_fraction_matches_poisson() {
        let n = 100_000;
        let card = issue_card(n, 0.5, 11).unwrap();
        let t = measure_honest(&card, &random_challenge(n, 12), 1.0, 13).unwrap();
        let s = transcript_stats(&card, &t);
        let p = (-0.5f64).exp();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((s.no_click_fraction() - p).abs() < 4.0 * sigma);
        assert_eq!(s.matched_errors, 0);
        let q = s.mismatched_ones as f64 / s.mismatched_answers as f64;
        assert!((q - 0.5).abs() < 4.0 * (0.25 / s.mismatched_answers as f64).sqrt());
    }

    #[test]
    fn flipped_answer_is_rejected() {
        let card = issue_card(2000, 1.0, 21).unwrap();
        let mut t = measure_honest(&card, &random_challenge(2000, 22), 1.0, 23).unwrap();
        assert!(bank_verify(&card, &t, 1.0, DEFAULT_KAPPA).unwrap().accepted);
        let j = (0..2000)
            .find(|&j| t.challenge[j] == card.basis[j] && t.answers[j] != Answer::NoClick)
            .unwrap();
        t.answers[j] = Answer::Bit(1 - card.key[j]);
        let v = bank_verify(&card, &t, 1.0, DEFAULT_KAPPA).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.wrong_answers, 1);
    }

    #[test]
    fn all_no_clicks_rejected() {
        let card = issue_card(500, 0.5, 1).unwrap();
        let t = ChallengeTranscript { challenge: vec![0; 500], answers: vec![Answer::NoClick; 500], double_clicks: 0 };
        assert!(!bank_verify(&card, &t, 1.0, DEFAULT_KAPPA).unwrap().accepted);
    }

    #[test]
    fn length_mismatch() {
        let card = issue_card(5, 0.5, 1).unwrap();
        assert!(matches!(measure_honest(&card, &[0; 4], 1.0, 1), Err(ProtocolError::LengthMismatch { .. })));
        let t = ChallengeTranscript { challenge: vec![0; 3], answers: vec![Answer::NoClick; 3], double_clicks: 0 };
        assert!(bank_verify(&card, &t, 1.0, DEFAULT_KAPPA).is_err());
    }

    proptest! {
        #[test]
        fn matched_answers_never_wrong(seed in any::<u64>(), mu in 0.0f64..3.0, eta in 0.1f64..1.0) {
            let card = issue_card(200, mu, seed).unwrap();
            let t = measure_honest(&card, &random_challenge(200, seed ^ 1), eta, seed ^ 2).unwrap();
            prop_assert_eq!(transcript_stats(&card, &t).matched_errors, 0);
        }
    }
}
