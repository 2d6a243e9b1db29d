use clap::Parser;
use cyclefv_cli::{Cli, CliError, Command, ExperimentConfig, FileConfig};

fn parse(args: &[&str]) -> Command {
    Cli::try_parse_from(std::iter::once("cyclefv").chain(args.iter().copied())).unwrap().command
}

fn file(json: &str) -> FileConfig {
    serde_json::from_str(json).unwrap()
}

#[test]
fn defaults_fill_unset_values() {
    let Command::Dynamics(a) = parse(&["dynamics", "--K", "5", "--N", "4"]) else { unreachable!() };
    let c = ExperimentConfig::for_dynamics(&a, &FileConfig::default()).unwrap();
    assert_eq!(*c.params.theta(), 1.0);
    assert_eq!(*c.params.p(), 1.0);
    assert_eq!(c.t_end, 5.0);
    assert_eq!(c.grid().len(), 21);
    assert_eq!(c.init.unwrap().counts(), &[4, 0, 0, 0, 0]);

    let Command::Verify(a) = parse(&["verify"]) else { unreachable!() };
    let c = ExperimentConfig::for_verify(&a, &FileConfig::default()).unwrap();
    assert_eq!((c.params.k(), c.particles(), c.seed, c.replicas), (4, 3, 1, 2000));
}

#[test]
fn flags_take_precedence_over_file() {
    let f = file(r#"{"K": 6, "N": 9, "theta": 0.5, "t_end": 2.0, "replicas": 30, "seed": 11}"#);
    let Command::Simulate(a) = parse(&["simulate", "--theta", "2", "--seed", "4"]) else { unreachable!() };
    let c = ExperimentConfig::for_simulate(&a, &f).unwrap();
    assert_eq!(c.params.k(), 6);
    assert_eq!(c.particles(), 9);
    assert_eq!(*c.params.theta(), 2.0);
    assert_eq!(c.seed, 4);
    assert_eq!(c.replicas, 30);
    assert_eq!(c.grid().last(), Some(&2.0));
}

#[test]
fn invalid_values_are_usage_errors() {
    let f = FileConfig::default();
    let usage = |r: Result<ExperimentConfig, CliError>| matches!(r, Err(CliError::Usage(_)));
    let Command::Simulate(a) = parse(&["simulate", "--K", "4", "--N", "3", "--t-end=-1"]) else { unreachable!() };
    assert!(usage(ExperimentConfig::for_simulate(&a, &f)));
    let Command::Simulate(a) = parse(&["simulate", "--K", "4", "--N", "3", "--t-end", "1", "--init", "1,1,1,1"]) else {
        unreachable!()
    };
    assert!(usage(ExperimentConfig::for_simulate(&a, &f)));
    let Command::Dynamics(a) = parse(&["dynamics", "--K", "4", "--N", "3", "--mu", "0.5,0.5"]) else { unreachable!() };
    assert!(usage(ExperimentConfig::for_dynamics(&a, &f)));
    let Command::Covariance(a) = parse(&["covariance", "--K", "4", "--N", "1"]) else { unreachable!() };
    assert!(usage(ExperimentConfig::for_covariance(&a, &f)));
    let Command::Spectrum(a) = parse(&["spectrum", "--K", "4", "--p", "0"]) else { unreachable!() };
    assert!(usage(ExperimentConfig::for_spectrum(&a, &f)));
}

#[test]
fn unknown_file_keys_are_rejected() {
    assert!(serde_json::from_str::<FileConfig>(r#"{"K": 4, "kappa": 1}"#).is_err());
}
