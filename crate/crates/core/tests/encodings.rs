//! Qudit and dual-rail runs against the base encoding.

use walker_qram::encodings::{check_commutation, level_steps};
use walker_qram::memory::MemoryBank;
use walker_qram::oracle::enumerate_reachable;
use walker_qram::protocol::{execute, schedule, CopyMode, Encoding, ProtocolConfig};
use walker_qram::walker::{Bits, QueryTerm};
use walker_qram::QramError;

#[test]
fn encodings_decode_like_base_for_every_address() {
    for n in 1..=3u8 {
        for m in 1..=2u8 {
            let banks = [
                MemoryBank::zeros(n, m).unwrap(),
                MemoryBank::uniform(n, m, Bits::ones(m)).unwrap(),
                MemoryBank::from_fn(n, m, |a| Bits::new(a % (1 << m), m).unwrap()).unwrap(),
            ];
            for config in [ProtocolConfig::standard(n, m).unwrap(), ProtocolConfig::switch(n, m).unwrap()] {
                for bank in &banks {
                    for a in 0..1u64 << n {
                        let query = [QueryTerm::classical(Bits::new(a, n).unwrap())];
                        let base = execute(&config, bank, &query).unwrap();
                        for encoding in [Encoding::Qudit, Encoding::DualRail] {
                            let other = execute(&config.with_encoding(encoding).unwrap(), bank, &query).unwrap();
                            assert_eq!(other, base, "{encoding:?} {:?} address {a}", config.copy_mode);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn every_step_commutes_with_the_translation() {
    for copy_mode in [CopyMode::Global, CopyMode::Switch] {
        let config = ProtocolConfig::new(2, 1, walker_qram::walker::Variant::Standard, copy_mode).unwrap();
        let space = enumerate_reachable(&config).unwrap();
        let gates: Vec<_> = schedule(&config).unwrap().into_iter().map(|s| s.gate).collect();
        let mut checked = 0;
        for i in 0..16 {
            let bank = MemoryBank::from_index(2, 1, i).unwrap();
            let mut k = 0;
            for step in level_steps(&gates) {
                for cfg in space.stage(k) {
                    let c = check_commutation(cfg, space.layout(), &bank, &step).unwrap();
                    assert!(c.commutes && c.positions_agree, "{step:?} on {}", cfg.render(space.layout()));
                    checked += 1;
                }
                k += step.len();
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn backup_registers_have_no_qudit_form() {
    let backup = ProtocolConfig::backup(2, 1).unwrap();
    assert!(matches!(backup.with_encoding(Encoding::Qudit), Err(QramError::Configuration(_))));
}
