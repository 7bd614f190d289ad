use hydronet::fixtures::generate_random_network;
use hydronet::network::validate;
use hydronet::solver::system_at;
use hydronet::SolverConfig;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_networks_validate_and_factor(
        seed in any::<u64>(),
        n in 2usize..80,
        loops in 0.0f64..0.6,
        spread in 0.0f64..4.0,
    ) {
        let capacity = n * (n - 1) / 2 - (n - 1);
        let extra = (loops * n as f64).round() as usize;
        let net = match generate_random_network(seed, n, loops, spread) {
            Ok(net) => net,
            Err(_) => {
                prop_assert!(extra > capacity);
                return Ok(());
            }
        };
        prop_assert_eq!(net.pipes.len(), n - 1 + extra);
        let report = validate(&net);
        prop_assert!(report.overall_ok, "{:?}", report.reasons());
        let (_, _, sys) = system_at(&net, &SolverConfig::default(), None).unwrap();
        prop_assert!(sys.factor().is_ok());
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), n in 2usize..40) {
        let a = generate_random_network(seed, n, 0.2, 2.0).unwrap();
        let b = generate_random_network(seed, n, 0.2, 2.0).unwrap();
        prop_assert_eq!(a, b);
    }
}
