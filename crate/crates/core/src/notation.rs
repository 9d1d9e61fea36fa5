//! Parsers for the ket notation used in traces.
//!
//! Base kets look like `R@(2,2)·D1 ⊗ ∅@2·A2 ⊗ R@(2,1)·A1`, qudit kets like
//! `(1,R)@(2,1)·A1`, dual-rail kets like `R@T1(2,1)·A1`. The last-injected
//! subsystem comes first and a trailing `F[on:a,b]` lists armed switches.
//! A primed depth marks the return leg; at the cell level primed and
//! unprimed both mean "at the cell", since the walkers only leave it with the
//! first inverse scatter.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::encodings::{Color, QuditConfig, QuditQState, QuditState, QuditWalker};
use crate::error::{QramError, Result};
use crate::walker::{BasisConfig, InternalState, Phase, QState, RegisterLayout, SubsystemId, Walker};

fn parse_err(text: &str, why: &str) -> QramError {
    QramError::Validation(format!("cannot parse ket '{text}': {why}"))
}

fn parse_depth(text: &str, depth: &str, cell_depth: u8) -> Result<(u8, Phase)> {
    let (depth, primed) = match depth.strip_suffix('′').or_else(|| depth.strip_suffix('\'')) {
        Some(d) => (d, true),
        None => (depth, false),
    };
    let depth: u8 = depth.trim().parse().map_err(|_| parse_err(text, "bad depth"))?;
    if depth == 0 || depth > cell_depth {
        return Err(parse_err(text, "depth outside the tree"));
    }
    let phase = if depth == cell_depth {
        Phase::AtCell
    } else if primed {
        Phase::Backward
    } else {
        Phase::Forward
    };
    Ok((depth, phase))
}

/// `(depth,branch)` or a bare depth.
fn parse_position(text: &str, pos: &str, cell_depth: u8) -> Result<(u8, Option<u64>, Phase)> {
    let (depth, branch) = match pos.strip_prefix('(').and_then(|p| p.strip_suffix(')')) {
        Some(inner) => {
            let (d, l) = inner.split_once(',').ok_or_else(|| parse_err(text, "expected (depth,branch)"))?;
            let l: u64 = l.trim().parse().map_err(|_| parse_err(text, "bad branch"))?;
            if l == 0 {
                return Err(parse_err(text, "branches are numbered from 1"));
            }
            (d, Some(l))
        }
        None => (pos, None),
    };
    let (depth, phase) = parse_depth(text, depth, cell_depth)?;
    Ok((depth, branch, phase))
}

fn parse_walker(text: &str, cell_depth: u8) -> Result<Walker> {
    let (state, pos) = text.split_once('@').ok_or_else(|| parse_err(text, "missing '@'"))?;
    let state = match state {
        "R" => InternalState::Red,
        "B" => InternalState::Blue,
        "∅" => InternalState::Empty,
        _ => return Err(parse_err(text, "state must be R, B or ∅")),
    };
    match (state, parse_position(text, pos, cell_depth)?) {
        (InternalState::Empty, (depth, None, phase)) => Ok(Walker::empty(depth, phase)),
        (InternalState::Empty, _) => Err(parse_err(text, "an empty subsystem has no branch")),
        (_, (depth, Some(l), phase)) => Ok(Walker::colored(state, depth, l, phase)),
        _ => Err(parse_err(text, "a walker needs a branch")),
    }
}

fn parse_color(text: &str, c: &str) -> Result<Color> {
    match c {
        "R" => Ok(Color::Red),
        "B" => Ok(Color::Blue),
        _ => Err(parse_err(text, "color must be R or B")),
    }
}

fn parse_qudit_walker(text: &str, cell_depth: u8, dual_rail: bool) -> Result<QuditWalker> {
    let (head, pos) = if dual_rail {
        let (c, rest) = text.split_once("@T").ok_or_else(|| parse_err(text, "missing '@T'"))?;
        let rail = rest.get(..1).ok_or_else(|| parse_err(text, "missing rail"))?;
        ((rail, c), &rest[1..])
    } else {
        let (q, pos) = text.split_once('@').ok_or_else(|| parse_err(text, "missing '@'"))?;
        let inner = q
            .strip_prefix('(')
            .and_then(|q| q.strip_suffix(')'))
            .ok_or_else(|| parse_err(text, "expected (rail,color)"))?;
        (inner.split_once(',').ok_or_else(|| parse_err(text, "expected (rail,color)"))?, pos)
    };
    let rail = match head.0 {
        "0" => false,
        "1" => true,
        _ => return Err(parse_err(text, "rail must be 0 or 1")),
    };
    let color = parse_color(text, head.1)?;
    match parse_position(text, pos, cell_depth)? {
        (depth, Some(branch), phase) => Ok(QuditWalker { state: QuditState { rail, color }, depth, branch, phase }),
        _ => Err(parse_err(text, "qudit walkers always carry a branch")),
    }
}

/// Split a ket into per-subsystem entries in register order plus switches.
fn split<T>(
    text: &str,
    layout: &RegisterLayout,
    mut item: impl FnMut(&str) -> Result<T>,
) -> Result<(Vec<T>, BTreeSet<u64>)> {
    let mut slots: Vec<Option<T>> = (0..layout.len()).map(|_| None).collect();
    let mut switches = BTreeSet::new();
    for part in text.split('⊗').map(str::trim) {
        if let Some(list) = part.strip_prefix("F[on:").and_then(|p| p.strip_suffix(']')) {
            for cell in list.split(',') {
                let cell: u64 = cell.trim().parse().map_err(|_| parse_err(text, "bad switch cell"))?;
                if cell >= 1u64 << layout.n() {
                    return Err(parse_err(text, "switch cell outside the bank"));
                }
                switches.insert(cell);
            }
            continue;
        }
        let (w, id) = part.rsplit_once('·').ok_or_else(|| parse_err(part, "missing '·subsystem'"))?;
        let id: SubsystemId = id.parse()?;
        let i = layout.index_of(id).ok_or_else(|| parse_err(part, "subsystem not in the register"))?;
        if slots[i].replace(item(w)?).is_some() {
            return Err(parse_err(text, "subsystem listed twice"));
        }
    }
    let items = slots
        .into_iter()
        .zip(layout.subsystems())
        .map(|(w, id)| w.ok_or_else(|| parse_err(text, &format!("{id} missing"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((items, switches))
}

/// Parse one base configuration. Every subsystem must appear exactly once.
pub fn parse_config(text: &str, layout: &RegisterLayout) -> Result<BasisConfig> {
    let (walkers, switches) = split(text, layout, |w| parse_walker(w, layout.cell_depth()))?;
    Ok(BasisConfig::with_switches(walkers, switches))
}

pub fn parse_qudit_config(text: &str, layout: &RegisterLayout, dual_rail: bool) -> Result<QuditConfig> {
    let (walkers, switches) = split(text, layout, |w| parse_qudit_walker(w, layout.cell_depth(), dual_rail))?;
    Ok(QuditConfig::new(walkers, switches))
}

pub fn parse_state(kets: &[(&str, Complex64)], layout: &RegisterLayout) -> Result<QState> {
    QState::from_terms(kets.iter().map(|(k, a)| Ok((parse_config(k, layout)?, *a))).collect::<Result<Vec<_>>>()?)
}

pub fn parse_qudit_state(kets: &[(&str, Complex64)], layout: &RegisterLayout, dual_rail: bool) -> Result<QuditQState> {
    QuditQState::from_terms(
        kets.iter().map(|(k, a)| Ok((parse_qudit_config(k, layout, dual_rail)?, *a))).collect::<Result<Vec<_>>>()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::to_qudit;
    use crate::walker::{encode_address, Variant};

    #[test]
    fn base_round_trips_rendering() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        for text in
            ["R@(2,2)·D1 ⊗ B@(2,2)·D0 ⊗ ∅@2·A2 ⊗ R@(2,1)·A1", "R@(1′,1)·D1 ⊗ R@(1′,1)·D0 ⊗ ∅@1′·A2 ⊗ R@(1′,1)·A1"]
        {
            assert_eq!(parse_config(text, &layout).unwrap().render(&layout), text);
        }
        let sw = RegisterLayout::new(1, 1, Variant::Standard, true).unwrap();
        let text = "R@(2,2)·D2 ⊗ R@(2,2)·D1 ⊗ R@(2,2)·D0 ⊗ R@(2,1)·A1 ⊗ F[on:1]";
        let cfg = parse_config(text, &sw).unwrap();
        assert_eq!(cfg.switches_on().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(cfg.render(&sw), text);
    }

    #[test]
    fn cell_level_ignores_the_prime() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let a = parse_config("R@(3′,3)·D1 ⊗ R@(3′,3)·D0 ⊗ ∅@3′·A2 ⊗ R@(3′,1)·A1", &layout).unwrap();
        let b = parse_config("R@(3,3)·D1 ⊗ R@(3,3)·D0 ⊗ ∅@3·A2 ⊗ R@(3,1)·A1", &layout).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.walker(0).pos.phase, Phase::AtCell);
    }

    #[test]
    fn qudit_round_trips_rendering() {
        let layout = RegisterLayout::standard(3, 2).unwrap();
        for a in 0..8 {
            let cfg = encode_address(crate::walker::Bits::new(a, 3).unwrap(), &layout).unwrap();
            let q = to_qudit(&cfg, &layout).unwrap();
            for dual in [false, true] {
                let text = q.render(&layout, dual);
                assert_eq!(parse_qudit_config(&text, &layout, dual).unwrap(), q, "{text}");
            }
        }
    }

    #[test]
    fn rejects_malformed_kets() {
        let layout = RegisterLayout::standard(1, 1).unwrap();
        for bad in [
            "R@(1,1)·D1 ⊗ R@(1,1)·D0",
            "R@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1 ⊗ R@(1,1)·A1",
            "∅@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1",
            "X@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1",
            "R@(1,0)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1",
            "R@(1,1)·D3 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1",
            "R@(7,1)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1",
            "R@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A1 ⊗ F[on:2]",
        ] {
            assert!(parse_config(bad, &layout).is_err(), "{bad}");
        }
        assert!(parse_qudit_config("(2,R)@(1,1)·D1 ⊗ (1,R)@(1,1)·D0 ⊗ (1,R)@(1,1)·A1", &layout, false).is_err());
        assert!(parse_qudit_config("R@T1(1,1)·D1 ⊗ R@T1(1,1)·D0 ⊗ R@1·A1", &layout, true).is_err());
    }
}
