mod common;

use proptest::prelude::*;
use roomnet_core::features::{Frame, Keypoint};
use roomnet_core::policy::score_gradient;
use roomnet_core::{confidence, Command, Inference, NavState, Phase, PolicyConfig};

/// A frame whose single keypoint lies on `axis` with a caller-chosen id, so
/// consecutive frames never look like a stationary view.
fn frame(id: u32, axis: usize, u: f32, t: f64) -> Frame {
    let mut d = vec![0.0f32; common::DIM];
    d[axis] = 1.0;
    Frame::new(id, t, vec![Keypoint { id, position: [u, 0.5], descriptor: d }]).unwrap()
}

fn sure_of(room: usize, classes: usize, t: f64) -> Inference {
    let mut p = vec![0.02; classes];
    p[room] = 1.0 - 0.02 * (classes - 1) as f64;
    Inference::from_probs(p, t)
}

#[test]
fn first_step_rotates_in_place() {
    let g = common::graph(2, &[(0, 1)]).unwrap();
    let cfg = PolicyConfig::default();
    let mut s = NavState::new(common::axis_frame(0, 1));
    let cmd = s.update(&frame(0, 5, 0.5, 0.0), &sure_of(0, 3, 0.0), &g, &cfg).unwrap();
    assert_eq!(cmd, Command::new(0.0, cfg.rot_speed));
    assert_eq!(s.phase, Phase::InitRotate);
}

#[test]
fn falling_score_on_the_goal_view_ends_the_mission() {
    let g = common::graph(2, &[(0, 1)]).unwrap();
    let cfg = PolicyConfig::default();
    let mut s = NavState::new(common::axis_frame(0, 1));
    let mut k = 0u32;
    let mut feed = |s: &mut NavState, axis: usize| {
        let t = k as f64 * 0.1;
        k += 1;
        s.update(&frame(k, axis, 0.5, t), &sure_of(1, 3, t), &g, &cfg).unwrap()
    };
    for _ in 0..=cfg.l {
        feed(&mut s, 5);
    }
    assert_eq!(s.phase, Phase::Seek);
    assert_eq!(s.plan.as_ref().unwrap().hierarchy, vec![1]);

    // Goal in view: approach it head on.
    let cmd = feed(&mut s, 1);
    assert_eq!(s.phase, Phase::Approach);
    assert_eq!(cmd, Command::new(cfg.lin_speed, 0.0));
    for _ in 0..5 {
        feed(&mut s, 1);
    }
    // Goal out of view: the smoothed score falls to zero.
    assert_ne!(feed(&mut s, 5), Command::STOP);
    assert_ne!(feed(&mut s, 5), Command::STOP);
    assert_eq!(feed(&mut s, 5), Command::STOP);
    assert_eq!(s.phase, Phase::GoalReached);
    assert_eq!(feed(&mut s, 1), Command::STOP);
    assert_eq!(s.phase, Phase::GoalReached);
}

fn allowed(from: Phase, to: Phase) -> bool {
    use Phase::*;
    match from {
        InitRotate => matches!(to, InitRotate | Seek),
        Seek | Replanning => matches!(to, Seek | Approach | Replanning),
        Approach => matches!(to, Approach | Advance | GoalReached | Seek | Replanning),
        Advance => matches!(to, Advance | Seek | Approach | Replanning),
        GoalReached => to == GoalReached,
    }
}

fn unanimous(w: &[usize], r: usize) -> bool {
    w.iter().all(|&x| x == r)
}

proptest! {
    #[test]
    fn random_streams_keep_phases_closed_and_commands_bounded(
        steps in prop::collection::vec((0usize..4, 0.0f32..1.0, prop::collection::vec(0.01f64..1.0, 5)), 1..200),
        goal in 0usize..4,
    ) {
        let g = common::graph(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let cfg = PolicyConfig::default();
        let mut s = NavState::new(common::axis_frame(0, goal));
        for (k, (axis, u, p)) in steps.into_iter().enumerate() {
            let t = k as f64 * 0.1;
            let before = s.phase;
            // Lean toward the room in view so the stream gets past the start.
            let mut p = p;
            p[axis] += 2.0;
            let total: f64 = p.iter().sum();
            let inf = Inference::from_probs(p.into_iter().map(|x| x / total).collect(), t);
            let cmd = s.update(&frame(k as u32, axis, u, t), &inf, &g, &cfg).unwrap();
            prop_assert!(allowed(before, s.phase), "{:?} -> {:?}", before, s.phase);
            prop_assert!(cmd.within(&cfg), "{:?}", cmd);
            if s.phase == Phase::GoalReached || s.phase == Phase::Replanning {
                prop_assert_eq!(cmd, Command::STOP);
            }
            if let Some(plan) = &s.plan {
                prop_assert!(plan.validate(&g).is_ok());
                prop_assert_eq!(plan.goal_room, goal);
            }
        }
    }

    #[test]
    fn confidence_peaks_only_when_unanimous(w in prop::collection::vec(0usize..5, 1..8), r in 0usize..5) {
        let c = confidence(&w, r);
        prop_assert!(c <= w.len() as f64);
        prop_assert_eq!(c == w.len() as f64, unanimous(&w, r));
    }

    #[test]
    fn a_disagreeing_entry_lowers_confidence(w in prop::collection::vec(0usize..5, 1..8), r in 0usize..5, other in 0usize..5, at in any::<prop::sample::Index>()) {
        prop_assume!(other != r);
        let mut w = w;
        let i = at.index(w.len());
        w[i] = r;
        let before = confidence(&w, r);
        w[i] = other;
        prop_assert!(confidence(&w, r) < before);
    }

    #[test]
    fn gradient_sign_does_not_depend_on_eta(h in prop::collection::vec(0.0f64..1.0, 6..12), eta in 0.01f64..10.0, w in 1usize..4) {
        let a = score_gradient(&h, 1.0, w).unwrap();
        let b = score_gradient(&h, eta, w).unwrap();
        prop_assert_eq!(a.partial_cmp(&0.0), b.partial_cmp(&0.0));
    }
}
