use qgame_core::circuit::{
    audit_preparation, build_preparation_circuit, parse_circuit_text, prepare_via_circuit,
    register_width, run_circuit, write_circuit_text, Variant,
};
use qgame_core::{GameConfig, QuditState, Regime};

fn max_deviation(a: &QuditState, b: &QuditState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn corrected_circuit_prepares_the_target_state() {
    for n in [2usize, 4, 8] {
        for regime in [Regime::AvoidWorst, Regime::EnhanceOptimum] {
            let cfg = GameConfig::new(n, regime.phase(n)).unwrap();
            let dev = max_deviation(
                &prepare_via_circuit(&cfg, Variant::Corrected).unwrap(),
                &QuditState::prepare_entangled(&cfg).unwrap(),
            );
            assert!(dev < 1e-10, "n={n} {regime:?}: {dev}");
        }
    }
}

#[test]
fn corrected_circuit_covers_every_phase_at_four_users() {
    for p in 0..8 {
        let cfg = GameConfig::new(4, p).unwrap();
        assert!(
            audit_preparation(&cfg, Variant::Corrected).unwrap().matches,
            "p={p}"
        );
    }
}

#[test]
fn figure_matches_only_in_the_two_user_case() {
    assert!(
        audit_preparation(&GameConfig::new(2, 1).unwrap(), Variant::PaperFigure)
            .unwrap()
            .matches
    );
    for p in 0..4 {
        let report =
            audit_preparation(&GameConfig::new(4, p).unwrap(), Variant::PaperFigure).unwrap();
        assert!(!report.matches, "p={p}");
    }
}

#[test]
fn exported_text_replays_to_the_same_register() {
    let cfg = GameConfig::enhance_optimum(4).unwrap();
    let gates = build_preparation_circuit(&cfg, Variant::Corrected).unwrap();
    let width = register_width(4).unwrap();
    let mut text = Vec::new();
    write_circuit_text(&gates, width, &mut text).unwrap();
    let (w, parsed) = parse_circuit_text(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(w, width);
    assert_eq!(parsed, gates);
    assert_eq!(
        run_circuit(&parsed, w).unwrap().amplitudes(),
        run_circuit(&gates, width).unwrap().amplitudes()
    );
}
