//! Questionnaire profiles for simulated participants.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{
    PersonProfile, DEVICES, EDUCATION_LEVELS, FAMILIARITY_SCALE, FREQUENCY_SCALE, GENDERS,
};
use crate::rng;

use super::participant_id;

const PROFILE_STREAM: u64 = 0x9f0f;

/// Relative frequencies of each answer, in vocabulary order.
const GENDER_W: [u32; 2] = [41, 29];
const EDUCATION_W: [u32; 4] = [5, 16, 40, 9];
const VR_W: [u32; 5] = [18, 33, 15, 1, 3];
const GAMING_W: [u32; 5] = [9, 12, 13, 14, 22];
const FAMILIARITY_W: [u32; 5] = [0, 6, 9, 16, 39];
const DEVICE_W: [u32; 2] = [34, 36];
const EVAC_YES: f64 = 0.3;

fn pick<'a, R: Rng>(rng: &mut R, vocab: &[&'a str], weights: &[u32]) -> &'a str {
    let mut u = rng.random_range(0..weights.iter().sum::<u32>());
    for (v, w) in vocab.iter().zip(weights) {
        if u < *w {
            return v;
        }
        u -= w;
    }
    vocab[vocab.len() - 1]
}

/// Profile of agent `agent`, drawn from its own stream.
pub fn generate_profile(seed: u64, agent: usize) -> PersonProfile {
    let mut rng = rng::stream(seed, &[PROFILE_STREAM, agent as u64]);
    let gender = pick(&mut rng, GENDERS, &GENDER_W);
    let age = Normal::new(28.27_f64, 6.38).unwrap().sample(&mut rng).clamp(17.0, 64.0).round();
    let mean_height: f64 = if gender == "Male" { 176.0 } else { 164.0 };
    let height = Normal::new(mean_height, 7.0).unwrap().sample(&mut rng).round();
    PersonProfile {
        gender: gender.into(),
        age,
        height,
        education: pick(&mut rng, EDUCATION_LEVELS, &EDUCATION_W).into(),
        vr_experience: pick(&mut rng, FREQUENCY_SCALE, &VR_W).into(),
        gaming_experience: pick(&mut rng, FAMILIARITY_SCALE, &GAMING_W).into(),
        building_familiarity: pick(&mut rng, FAMILIARITY_SCALE, &FAMILIARITY_W).into(),
        evacuation_experience: if rng.random::<f64>() < EVAC_YES { "Yes" } else { "No" }.into(),
        device: pick(&mut rng, DEVICES, &DEVICE_W).into(),
    }
}

/// Profiles keyed by participant id for agents `0..n_agents`.
pub fn generate_profiles(seed: u64, n_agents: usize) -> BTreeMap<String, PersonProfile> {
    (0..n_agents)
        .map(|a| (participant_id(a), generate_profile(seed, a)))
        .collect()
}
