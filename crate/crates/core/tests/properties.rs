mod common;

macro_rules! property_tests {
    ($($name:ident => $check:path),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                match $check() {
                    Ok(summary) => println!("{summary}"),
                    Err(e) => panic!("{e}"),
                }
            }
        )*
    };
}

property_tests! {
    cosine_bounds => common::prop_cosine_bounds,
    zeta_range_and_invariances => common::prop_zeta_invariances,
    relative_change_identities => common::prop_relative_change,
    fit_slope_recovers_power_laws => common::prop_fit_slope_exact,
    zero_crossing_on_affine_series => common::prop_zero_crossing_affine,
    hidden_permutation_invariance => common::prop_permutation_invariance,
    output_scale_invariance => common::prop_prediction_scaling,
    gamma_round_trip => common::prop_gamma_round_trip,
    published_groups_share_coordinates => common::prop_group_coordinates,
    training_is_deterministic => common::prop_determinism,
    phase_scan_resumes_identically => common::prop_scan_resume,
    idx_round_trip => common::prop_idx_round_trip,
    checkpoint_round_trip => common::prop_checkpoint_round_trip,
    float_format_round_trip => common::prop_float_format,
}
