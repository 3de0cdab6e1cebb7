mod common;

use common::{dc_adse, dc_wls_oracle, max_abs_diff, oracle_admm, random_dc_system};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adse_matches_normal_equations(seed in any::<u64>()) {
        let system = random_dc_system(seed);
        let oracle = dc_wls_oracle(&system.case, &system.plan, &system.y.values, &system.weights);
        let adse = dc_adse(&system, &oracle_admm());
        prop_assert!(max_abs_diff(&adse, &oracle) < 1e-6, "seed {seed}: {adse:?} vs {oracle:?}");
    }
}
