mod common;

use common::*;
use jobpruner::kb::{from_json, load_kb, save, to_json, KbEntry, Metadata};
use jobpruner::space::{DomainKind, ExperimentRecord, Job};
use rand::seq::index::sample;
use rand::Rng;

fn awkward(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    loop {
        let y = match rng.gen_range(0..6) {
            0 => f64::from_bits(rng.gen()),
            1 => f64::from_bits(rng.gen_range(1..1u64 << 52)),
            2 => -f64::from_bits(rng.gen_range(1..1u64 << 52)),
            3 => rng.gen_range(-1.0..1.0) * 1e300,
            4 => 0.1 * f64::from(rng.gen_range(-50..50i32)),
            _ => rng.gen::<f64>(),
        };
        if y.is_finite() {
            return y;
        }
    }
}

#[test]
fn large_record_round_trips_bit_exact() {
    let mut r = rng(0x6b);
    let space = space_of(&[
        (DomainKind::Categorical, 3),
        (DomainKind::Categorical, 3),
        (DomainKind::Ordinal, 13),
        (DomainKind::Ordinal, 48),
    ]);
    let mut jobs: Vec<Job> = sample(&mut r, space.size() as usize, 5502)
        .into_iter()
        .map(|i| Job::done(space.point_at(i), awkward(&mut r)))
        .collect();
    for (job, y) in jobs.iter_mut().zip([-0.0, 0.0, f64::MIN_POSITIVE / 3.0, f64::MAX, f64::MIN, 5e-324]) {
        job.output = y;
    }
    let record = ExperimentRecord::new("field-17", space, jobs, None).unwrap();
    let entry = KbEntry::new(
        record,
        Metadata {
            application: "seismic".into(),
            created_unix: 1_700_000_000,
            notes: "quoted \"notes\"\nwith a newline".into(),
        },
    );

    let text = to_json(&entry).unwrap();
    let back = from_json(&text, "mem.json".as_ref()).unwrap();
    assert_eq!(back.record.jobs().len(), 5502);
    for (a, b) in entry.record.jobs().iter().zip(back.record.jobs()) {
        assert_eq!(a.point, b.point);
        assert_eq!(a.output.to_bits(), b.output.to_bits());
    }
    assert_eq!(back, entry);
    assert_eq!(to_json(&back).unwrap(), text);

    let dir = tempfile::tempdir().unwrap();
    save(&entry, dir.path()).unwrap();
    let loaded = load_kb(dir.path()).unwrap();
    assert!(loaded.warnings.is_empty());
    assert_eq!(loaded.entries, vec![entry]);
}
