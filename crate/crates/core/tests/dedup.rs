use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skillnet_core::curation::{consolidate, deduplicate, CurationConfig};
use skillnet_core::judge::RuleJudge;
use skillnet_core::skill::{Category, Resource, SkillDocument, SkillMetadata, SkillPackage};
use skillnet_testkit::{gen, GOOD_BODY};

fn corpus(rng: &mut ChaCha8Rng) -> Vec<SkillPackage> {
    let unique: Vec<SkillPackage> = (0..40)
        .map(|i| {
            let meta = SkillMetadata::new(&format!("skill-{i:02}"), &gen::phrase(rng, 6), Category::Other);
            let resources = if i % 3 == 0 { vec![Resource::new("data.txt", gen::phrase(rng, 4))] } else { vec![] };
            SkillPackage::new(SkillDocument::new(meta, GOOD_BODY), resources).unwrap()
        })
        .collect();
    let mut all = unique.clone();
    all.extend(unique.choose_multiple(rng, 10).cloned());
    all.shuffle(rng);
    all
}

fn ids(packages: &[SkillPackage]) -> BTreeSet<String> {
    packages.iter().map(|p| p.id.clone()).collect()
}

#[test]
fn forty_survivors_stable_under_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let packages = corpus(&mut rng);
    assert_eq!(packages.len(), 50);
    let (survivors, dropped) = deduplicate(packages.clone());
    assert_eq!(survivors.len(), 40);
    assert_eq!(dropped.len(), 10);
    assert!(dropped.iter().all(|d| survivors.iter().any(|s| s.id == d.kept_id)));

    let (again, none) = deduplicate(survivors.clone());
    assert!(none.is_empty());
    assert_eq!(again, survivors);

    let expected = ids(&survivors);
    for _ in 0..10 {
        let mut shuffled = packages.clone();
        shuffled.shuffle(&mut rng);
        let (s, d) = deduplicate(shuffled);
        assert_eq!(ids(&s), expected);
        assert_eq!(d.len(), 10);
    }
}

#[test]
fn consolidate_reports_every_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let packages = corpus(&mut rng);
    let out = consolidate(packages, &RuleJudge::default(), None, &CurationConfig::default()).unwrap();
    assert_eq!(out.report.input_count, 50);
    assert_eq!(out.report.duplicates_removed.len(), 10);
    assert_eq!(out.report.accounted(), 50);
}
