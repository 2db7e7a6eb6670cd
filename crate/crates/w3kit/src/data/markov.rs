//! Markov scripts over (verb, noun) action pairs, modeling the
//! follow-up structure of sequential activities (an "open X" is usually
//! followed by a "close X"), plus the noisy first-stage logit simulator the
//! temporal-context experiments consume.

use serde::{Deserialize, Serialize};

use crate::ctxt::ClipLogits;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Row-stochastic transition matrix over a state set of (verb, noun) pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovActionScript {
    pub pairs: Vec<(usize, usize)>,
    pub transition: Vec<Vec<f64>>,
    pub video_length: usize,
}

impl MarkovActionScript {
    pub fn validate(&self, verbs: usize, nouns: usize) -> Result<()> {
        if self.pairs.is_empty() || self.video_length == 0 {
            return Err(Error::Config("empty Markov script".into()));
        }
        if self.transition.len() != self.pairs.len() {
            return Err(Error::shape(
                "MarkovActionScript",
                format!("{} transition rows", self.pairs.len()),
                format!("{}", self.transition.len()),
            ));
        }
        for &(v, n) in &self.pairs {
            if v >= verbs || n >= nouns {
                return Err(Error::Config(format!(
                    "script pair ({v}, {n}) outside vocabulary {verbs}x{nouns}"
                )));
            }
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != self.pairs.len() {
                return Err(Error::shape(
                    "MarkovActionScript row",
                    format!("{}", self.pairs.len()),
                    format!("{}", row.len()),
                ));
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(Error::Config(format!("negative probability in row {i}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "transition row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Sample one video's action sequence; the start state is uniform.
    pub fn sample_sequence(&self, rng: &mut Rng) -> Vec<(usize, usize)> {
        let mut state = rand::Rng::random_range(rng, 0..self.pairs.len());
        let mut out = Vec::with_capacity(self.video_length);
        out.push(self.pairs[state]);
        for _ in 1..self.video_length {
            let u: f64 = rand::Rng::random(rng);
            let row = &self.transition[state];
            let mut acc = 0.0;
            let mut next = row.len() - 1;
            for (j, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            state = next;
            out.push(self.pairs[state]);
        }
        out
    }
}

/// Paired-verb convention: verbs come in (open, close)-style pairs and the
/// partner of verb `v` is `v ^ 1`.
pub fn partner_verb(v: usize) -> usize {
    v ^ 1
}

/// Script over every (verb, noun) pair where the follow-up action
/// (partner verb, same noun) occurs with probability `p_follow` and the
/// remainder spreads uniformly over all other pairs.
pub fn paired_verb_script(
    verbs: usize,
    nouns: usize,
    p_follow: f64,
    video_length: usize,
) -> Result<MarkovActionScript> {
    if verbs % 2 != 0 || verbs == 0 {
        return Err(Error::Config(format!(
            "paired-verb script needs an even verb count, got {verbs}"
        )));
    }
    if !(0.0..=1.0).contains(&p_follow) {
        return Err(Error::Config(format!("p_follow {p_follow} outside [0, 1]")));
    }
    let pairs: Vec<(usize, usize)> = (0..verbs)
        .flat_map(|v| (0..nouns).map(move |n| (v, n)))
        .collect();
    let index = |v: usize, n: usize| v * nouns + n;
    let k = pairs.len();
    let mut transition = vec![vec![0.0; k]; k];
    for (i, &(v, n)) in pairs.iter().enumerate() {
        let follow = index(partner_verb(v), n);
        let rest = (1.0 - p_follow) / (k - 1) as f64;
        for (j, slot) in transition[i].iter_mut().enumerate() {
            *slot = if j == follow { p_follow } else { rest };
        }
    }
    let script = MarkovActionScript {
        pairs,
        transition,
        video_length,
    };
    script.validate(verbs, nouns)?;
    Ok(script)
}

/// Noise model for simulated first-stage logits. The true verb gets
/// `true_gain`, its partner verb `partner_gain` (the confusable pair), nouns
/// get `noun_gain`; everything is jittered with Gaussian noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogitNoiseModel {
    pub true_gain: f64,
    pub partner_gain: f64,
    pub verb_sigma: f64,
    pub noun_gain: f64,
    pub noun_sigma: f64,
}

impl Default for LogitNoiseModel {
    fn default() -> Self {
        LogitNoiseModel {
            true_gain: 1.6,
            partner_gain: 1.1,
            verb_sigma: 0.9,
            noun_gain: 2.4,
            noun_sigma: 0.9,
        }
    }
}

/// Simulate per-clip first-stage logits for a label sequence.
pub fn simulate_first_stage_logits(
    rng: &mut Rng,
    labels: &[(usize, usize)],
    verbs: usize,
    nouns: usize,
    model: &LogitNoiseModel,
) -> Vec<ClipLogits<f64>> {
    labels
        .iter()
        .map(|&(v, n)| {
            let mut verb: Vec<f64> = (0..verbs)
                .map(|_| rng::normal(rng, 0.0, model.verb_sigma))
                .collect();
            verb[v] += model.true_gain;
            let p = partner_verb(v);
            if p < verbs {
                verb[p] += model.partner_gain;
            }
            let mut noun: Vec<f64> = (0..nouns)
                .map(|_| rng::normal(rng, 0.0, model.noun_sigma))
                .collect();
            noun[n] += model.noun_gain;
            ClipLogits { verb, noun }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_script_repeats_exactly() {
        // All probability mass on one successor: every sequence from a given
        // start is forced.
        let script = MarkovActionScript {
            pairs: vec![(0, 0), (1, 0)],
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            video_length: 6,
        };
        script.validate(2, 1).unwrap();
        let mut r = rng::seeded(0);
        let seq = script.sample_sequence(&mut r);
        for (i, &(v, _)) in seq.iter().enumerate() {
            assert_eq!(v, (seq[0].0 + i) % 2);
        }
    }

    #[test]
    fn certain_follow_up_always_happens() {
        let script = paired_verb_script(4, 3, 1.0, 8).unwrap();
        let mut r = rng::seeded(5);
        for _ in 0..20 {
            let seq = script.sample_sequence(&mut r);
            for w in seq.windows(2) {
                assert_eq!(w[1].0, partner_verb(w[0].0));
                assert_eq!(w[1].1, w[0].1);
            }
        }
    }

    #[test]
    fn follow_up_frequency_converges_to_p() {
        let script = paired_verb_script(8, 12, 0.8, 101).unwrap();
        let mut r = rng::seeded(9);
        let mut follow = 0usize;
        let mut total = 0usize;
        while total < 10_000 {
            let seq = script.sample_sequence(&mut r);
            for w in seq.windows(2) {
                total += 1;
                if w[1].0 == partner_verb(w[0].0) && w[1].1 == w[0].1 {
                    follow += 1;
                }
            }
        }
        let freq = follow as f64 / total as f64;
        assert!((freq - 0.8).abs() <= 0.02, "follow frequency {freq}");
    }

    #[test]
    fn rows_must_sum_to_one() {
        let script = MarkovActionScript {
            pairs: vec![(0, 0), (1, 0)],
            transition: vec![vec![0.6, 0.3], vec![0.5, 0.5]],
            video_length: 4,
        };
        assert!(script.validate(2, 1).is_err());
    }

    #[test]
    fn simulated_logits_favor_true_labels_on_average() {
        let mut r = rng::seeded(3);
        let labels = vec![(2usize, 5usize); 400];
        let sims = simulate_first_stage_logits(&mut r, &labels, 8, 12, &LogitNoiseModel::default());
        let mean_true: f64 = sims.iter().map(|s| s.verb[2]).sum::<f64>() / 400.0;
        let mean_other: f64 = sims.iter().map(|s| s.verb[0]).sum::<f64>() / 400.0;
        assert!(mean_true > mean_other + 1.0);
    }
}
