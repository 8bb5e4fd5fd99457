use compass_audit_core::probing::{probe_model, LexiconSet, ProbeConfig};
use compass_audit_core::stability::{run_variants, stability_report, template_variants};
use compass_audit_core::{CompassPoint, ScoringTable, StatementBank};
use compass_audit_providers::{MockRespondent, MockRespondentConfig};

fn mock(social: f64, economic: f64, noise: f64) -> MockRespondent {
    MockRespondent::new(MockRespondentConfig::new(CompassPoint::new(social, economic), noise, 11).unwrap())
}

#[test]
fn encoder_recovers_latent_grid() {
    let bank = StatementBank::default_bank();
    let table = ScoringTable::from_bank(&bank);
    let grid = [-9.0, -4.5, 0.0, 4.5, 9.0];
    let mut worst: f64 = 0.0;
    for social in grid {
        for economic in grid {
            let r = probe_model(
                &mock(social, economic, 0.0),
                &bank,
                &LexiconSet::default(),
                &table,
                &ProbeConfig::encoder(),
            )
            .unwrap();
            let err = (r.point.social - social).abs().max((r.point.economic - economic).abs());
            worst = worst.max(err);
            assert!(err <= 1.0, "latent ({social}, {economic}) recovered as {:?}", r.point);
        }
    }
    eprintln!("worst coordinate error {worst}");
}

#[test]
fn decoder_recovers_latent() {
    let bank = StatementBank::default_bank();
    let table = ScoringTable::from_bank(&bank);
    for (social, economic) in [(-6.0, 7.5), (2.0, -1.0), (9.0, 9.0)] {
        let r =
            probe_model(&mock(social, economic, 0.0), &bank, &LexiconSet::default(), &table, &ProbeConfig::decoder())
                .unwrap();
        assert!((r.point.social - social).abs() <= 1.0, "{:?}", r.point);
        assert!((r.point.economic - economic).abs() <= 1.0, "{:?}", r.point);
        assert!(r.sheet.unanswered.is_empty());
    }
}

#[test]
fn template_variants_agree_without_noise() {
    let bank = StatementBank::default_bank();
    let table = ScoringTable::from_bank(&bank);
    let variants = template_variants(&bank, &[1, 2, 3, 4, 5, 6, 7]);
    let lex = LexiconSet::default();
    let clean = run_variants(&mock(3.0, -4.0, 0.0), &variants, &lex, &table, &ProbeConfig::decoder(), true).unwrap();
    assert_eq!(stability_report(&clean).unwrap().point_spread, 0.0);
    let noisy = run_variants(&mock(3.0, -4.0, 0.3), &variants, &lex, &table, &ProbeConfig::decoder(), true).unwrap();
    assert!(stability_report(&noisy).unwrap().point_spread > 0.0);
}
