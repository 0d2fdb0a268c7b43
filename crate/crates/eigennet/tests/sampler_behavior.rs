//! Chain-level behavior on realistic synthetic problems: the coupling
//! penalty must actually pull the two coefficient blocks together, and a
//! full-length adapted run must land in a usable acceptance-rate band.

use eigennet::datagen::{generate_correlated, GroupSpec, SynthSpec, WeightRule};
use eigennet::eigen::eigendecompose;
use eigennet::model::HyperParams;
use eigennet::sampler::{run_chain, SamplerConfig};

fn small_correlated_problem(seed: u64) -> eigennet::Dataset {
    let spec = SynthSpec {
        p: 10,
        groups: vec![GroupSpec {
            size: 4,
            correlation: 0.81,
            weight_rule: WeightRule::FixedValue(5.0),
        }],
        n_train: 40,
        n_test: 10,
        noiseless_labels: false,
    };
    generate_correlated(&spec, seed).unwrap().train
}

#[test]
fn stronger_coupling_pulls_the_coefficient_blocks_together() {
    let train = small_correlated_problem(7);
    let basis = eigendecompose(&train).unwrap();

    let gaps: Vec<f64> = [1e2, 1e4, 1e6]
        .into_iter()
        .map(|lambda3| {
            let hp = HyperParams::new(1.0, 1.0, lambda3).unwrap();
            let cfg = SamplerConfig {
                seed: 11,
                ..SamplerConfig::desk_scale()
            };
            let chain = run_chain(&train, &basis, &hp, &cfg).unwrap();
            (&chain.best_state.alpha - &chain.best_state.beta).norm()
        })
        .collect();

    // mode-finding by best-seen state is noisy, so successive gaps only
    // need to avoid growing by more than 2x, but the trend across four
    // orders of magnitude must point down
    for pair in gaps.windows(2) {
        assert!(
            pair[1] <= 2.0 * pair[0],
            "gap grew too much under stronger coupling: {gaps:?}"
        );
    }
    assert!(
        gaps[2] < gaps[0],
        "gap failed to shrink end to end: {gaps:?}"
    );
}

#[test]
fn full_length_run_keeps_acceptance_rates_in_a_usable_band() {
    let spec = SynthSpec::two_group_default(80);
    let train = generate_correlated(&spec, 3).unwrap().train;
    let basis = eigendecompose(&train).unwrap();
    let hp = HyperParams::new(1.0, 1.0, 1.0).unwrap();
    let cfg = SamplerConfig {
        seed: 19,
        ..SamplerConfig::default()
    };

    let chain = run_chain(&train, &basis, &hp, &cfg).unwrap();

    let rates = [
        ("alpha", chain.accept_rates.alpha),
        ("beta", chain.accept_rates.beta),
        ("s", chain.accept_rates.s),
        ("bias", chain.accept_rates.bias),
    ];
    for (block, rate) in rates {
        assert!(
            (0.1..=0.6).contains(&rate),
            "{block} block acceptance rate {rate} outside [0.1, 0.6]"
        );
    }
}
