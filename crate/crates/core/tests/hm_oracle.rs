mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskchoice::axioms::DeferralPolicy;
use riskchoice::choice::Correspondence;
use riskchoice::hm::{HmMode, HmTable};

fn tables(inst: &common::Instance) -> (HmTable, HmTable, Correspondence) {
    let strict = HmTable::new(HmMode::Strict, inst.n, &inst.menus).unwrap();
    let weak = HmTable::new(HmMode::Weak, inst.n, &inst.menus).unwrap();
    let c = Correspondence::new(inst.choices.iter().map(|&l| 1u16 << l).collect());
    (strict, weak, c)
}

#[test]
fn strict_score_matches_minimal_deletion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let inst = common::random_instance(&mut rng, 5, 6);
        let (strict, _, c) = tables(&inst);
        assert_eq!(strict.score(&c, DeferralPolicy::Strict), common::hm_oracle(&inst), "{inst:?}");
    }
}

#[test]
fn full_evaluation_agrees_with_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let inst = common::random_instance(&mut rng, 5, 6);
        let (strict, _, c) = tables(&inst);
        let result = strict.evaluate(&c, DeferralPolicy::Strict);
        assert_eq!(result.score, strict.score(&c, DeferralPolicy::Strict));
        assert_eq!(result.mistakes.len(), result.score);
        assert!(result.witnesses.contains(&(result.canonical as u32)));
    }
}

// An acyclic revealed relation extends to a linear order, so on
// single-valued data a weak order does no better than a linear one.
#[test]
fn weak_equals_strict_on_single_valued_choices() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let inst = common::random_instance(&mut rng, 4, 6);
        let (strict, weak, c) = tables(&inst);
        assert_eq!(weak.score(&c, DeferralPolicy::Strict), strict.score(&c, DeferralPolicy::Strict), "{inst:?}");
    }
}

#[test]
fn lenient_policy_skips_deferrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..300 {
        let mut inst = common::random_instance(&mut rng, 5, 6);
        let (strict, _, mut c) = tables(&inst);
        c.values[0] = 0;
        let lenient = strict.score(&c, DeferralPolicy::Lenient);
        let penalized = strict.score(&c, DeferralPolicy::Strict);
        assert_eq!(penalized, lenient + 1);
        inst.menus.remove(0);
        inst.choices.remove(0);
        assert_eq!(lenient, common::hm_oracle(&inst));
    }
}
