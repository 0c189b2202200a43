mod common;

use crs_core::probes::{audit, generate, generate_all, read_probes, write_probes, ProbeConfig, ProbeFamily};
use crs_core::Execution;

#[test]
fn every_generated_probe_passes_the_audit() {
    let store = common::store(&common::synth());
    let config = ProbeConfig::default();
    let set = generate_all(&store, &config, Execution::Parallel);
    for family in ProbeFamily::ALL {
        assert!(set.probes.iter().any(|p| p.family == family), "no {family} probes");
    }
    for p in &set.probes {
        audit(p, &store, &config).unwrap_or_else(|e| panic!("{e}: {p:?}"));
    }
}

#[test]
fn parallel_and_sequential_generation_agree() {
    let store = common::store(&common::synth());
    for seed in [0, 13, 99] {
        let config = ProbeConfig::with_seed(seed);
        assert_eq!(
            generate_all(&store, &config, Execution::Parallel),
            generate_all(&store, &config, Execution::Sequential)
        );
    }
}

#[test]
fn seeds_change_negatives_only() {
    let store = common::store(&common::synth());
    let a = generate(&store, ProbeFamily::Recommendation, &ProbeConfig::with_seed(1), Execution::Parallel);
    let b = generate(&store, ProbeFamily::Recommendation, &ProbeConfig::with_seed(2), Execution::Parallel);
    assert_eq!(a.probes.len(), b.probes.len());
    let key = |p: &crs_core::probes::ProbeCase| (p.metadata.query_movie, p.metadata.positive_movie);
    assert!(a.probes.iter().zip(&b.probes).all(|(x, y)| key(x) == key(y)));
    assert!(a.probes.iter().zip(&b.probes).any(|(x, y)| x.metadata.negative_movie != y.metadata.negative_movie));
}

#[test]
fn templates_fill_titles_with_delimiters() {
    let store = common::store(&common::synth());
    let set = generate_all(&store, &ProbeConfig::default(), Execution::Sequential);
    let rec = set.probes.iter().find(|p| p.family == ProbeFamily::Recommendation).unwrap();
    let q = store.lower_title(rec.metadata.query_movie.unwrap());
    assert_eq!(rec.inputs[0], format!("[user] can you recommend me a movie like @ {q} @"));
    let pos = store.lower_title(rec.metadata.positive_movie);
    assert_eq!(rec.targets[0], format!("sure, have you seen @ {pos} @?"));

    let attr = set.probes.iter().find(|p| p.family == ProbeFamily::Attribute).unwrap();
    let tag = attr.metadata.tag.as_deref().unwrap();
    assert_eq!(attr.inputs[0], format!("[user] can you recommend me a {tag} movie?"));

    let desc = set.probes.iter().find(|p| p.family == ProbeFamily::Description).unwrap();
    let pos = store.lower_title(desc.metadata.positive_movie);
    assert_eq!(desc.inputs[0], format!("[user] what is your opinion on @ {pos} @?"));
}

#[test]
fn audit_catches_tampering() {
    let store = common::store(&common::synth());
    let config = ProbeConfig::default();
    let set = generate_all(&store, &config, Execution::Sequential);
    for family in ProbeFamily::ALL {
        let mut p = set.probes.iter().find(|p| p.family == family).unwrap().clone();
        p.metadata.negative_movie = p.metadata.positive_movie;
        assert!(audit(&p, &store, &config).is_err());
    }
    let mut p = set.probes[0].clone();
    p.targets.pop();
    assert!(audit(&p, &store, &config).is_err());
}

#[test]
fn probes_round_trip_through_jsonl() {
    let store = common::store(&common::synth());
    let set = generate_all(&store, &ProbeConfig::default(), Execution::Parallel);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("probes.jsonl");
    write_probes(&path, &set.probes).unwrap();
    assert_eq!(read_probes(&path).unwrap(), set.probes);
}

#[test]
fn family_names_parse() {
    for f in ProbeFamily::ALL {
        assert_eq!(f.short().parse::<ProbeFamily>().unwrap(), f);
        assert_eq!(f.to_string().parse::<ProbeFamily>().unwrap(), f);
    }
    assert!("nope".parse::<ProbeFamily>().is_err());
}
