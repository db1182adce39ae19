mod common;

use proptest::prelude::*;
use roomnet_core::graph::resolve_goal_room;
use roomnet_core::rng::derive_seed;
use roomnet_core::sim::{default_tour, record_episode, DoorwaySpec, RecordConfig, RoomRect, DEFAULT_ROOM_SIZE};
use roomnet_core::{build_graph, plan, replan, Error, GraphConfig, PlanConfig, World, WorldSpec};

/// Length in hops of the shortest simple path, by enumerating all of them.
fn brute_force_hops(n: usize, edges: &[(usize, usize)], a: usize, b: usize) -> Option<usize> {
    fn walk(n: usize, adj: &[bool], at: usize, goal: usize, seen: &mut Vec<bool>, depth: usize, best: &mut Option<usize>) {
        if at == goal {
            *best = Some(best.map_or(depth, |b| b.min(depth)));
            return;
        }
        for next in 0..n {
            if adj[at * n + next] && !seen[next] {
                seen[next] = true;
                walk(n, adj, next, goal, seen, depth + 1, best);
                seen[next] = false;
            }
        }
    }
    let mut adj = vec![false; n * n];
    for &(x, y) in edges {
        adj[x * n + y] = true;
        adj[y * n + x] = true;
    }
    let mut seen = vec![false; n];
    seen[a] = true;
    let mut best = None;
    walk(n, &adj, a, b, &mut seen, 0, &mut best);
    best
}

/// Random connected graph: a random spanning tree plus random extra edges.
fn connected_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=6).prop_flat_map(|n| {
        let parents: Vec<_> = (1..n).map(|v| 0..v).collect();
        let extra = prop::collection::vec((0..n, 0..n), 0..8);
        (Just(n), parents, extra).prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.into_iter().enumerate().map(|(i, p)| (p, i + 1)).collect();
            for (a, b) in extra {
                let e = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
                    edges.push(e);
                }
            }
            (n, edges)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn planner_matches_brute_force((n, edges) in connected_graph(), a in 0usize..6, b in 0usize..6) {
        let (a, b) = (a % n, b % n);
        let g = common::graph(n, &edges).unwrap();
        let path = g.shortest_path(a, b).unwrap();
        prop_assert_eq!(Some(path.len() - 1), brute_force_hops(n, &edges, a, b));
        prop_assert_eq!(path[0], a);
        prop_assert_eq!(*path.last().unwrap(), b);

        let p = plan(&g, a, &common::axis_frame(0, b), &PlanConfig::default()).unwrap();
        prop_assert_eq!(&p.hierarchy, &path);
        prop_assert!(p.validate(&g).is_ok());
        for w in p.hierarchy.windows(2) {
            prop_assert!(g.is_adjacent(w[0], w[1]));
        }
    }

    #[test]
    fn replanning_keeps_the_goal((n, edges) in connected_graph(), a in 0usize..6, b in 0usize..6, c in 0usize..6) {
        let (a, b, c) = (a % n, b % n, c % n);
        let g = common::graph(n, &edges).unwrap();
        let first = plan(&g, a, &common::axis_frame(0, b), &PlanConfig::default()).unwrap();
        let again = replan(&g, c, &first).unwrap();
        prop_assert_eq!(again.goal_room, b);
        prop_assert_eq!(again.hierarchy[0], c);
        prop_assert_eq!(*again.hierarchy.last().unwrap(), b);
        prop_assert!(again.validate(&g).is_ok());
    }
}

#[test]
fn source_equal_to_goal_is_a_single_room() {
    let g = common::graph(3, &[(0, 1), (1, 2)]).unwrap();
    let p = plan(&g, 2, &common::axis_frame(0, 2), &PlanConfig::default()).unwrap();
    assert_eq!(p.hierarchy, vec![2]);
    assert!(p.transition_targets.is_empty());
}

#[test]
fn unknown_goal_and_bad_parts_are_rejected() {
    let g = common::graph(3, &[(0, 1), (1, 2)]).unwrap();
    // Axis 7 is not a keyframe of any room.
    assert_eq!(resolve_goal_room(&g, &common::axis_frame(0, 7), &PlanConfig::default()), Err(Error::GoalNotRecognized));
    assert!(common::graph(3, &[(0, 1)]).is_err(), "disconnected graph accepted");
}

fn record_all(world: &World, seed: u64, count: usize) -> Vec<roomnet_core::Episode> {
    (0..count)
        .map(|i| {
            let tour = default_tour(world, i % world.room_count(), derive_seed(seed, i as u64)).unwrap();
            record_episode(world, &tour, &RecordConfig::default(), derive_seed(seed ^ 1, i as u64)).unwrap()
        })
        .collect()
}

#[test]
fn default_world_graph_matches_ground_truth_and_rebuilds_identically() {
    let world = World::default_world(7);
    let episodes = record_all(&world, 7, 2);
    let g = build_graph(&episodes, 4, &GraphConfig::default()).unwrap();
    assert_eq!(g.adjacency(), world.adjacency().as_slice());
    assert_eq!(g, build_graph(&episodes, 4, &GraphConfig::default()).unwrap());
    assert_eq!(g.edge_count(), 4);
}

#[test]
fn chain_world_has_end_rooms_of_degree_one() {
    let s = DEFAULT_ROOM_SIZE;
    let spec = WorldSpec {
        rooms: (0..4).map(|i| RoomRect::new(i as f64 * s, 0.0, (i + 1) as f64 * s, s)).collect(),
        doorways: (0..3).map(|i| DoorwaySpec { rooms: [i, i + 1], center: 0.5 * s, width: 1.2 }).collect(),
        ..WorldSpec::default_world(3)
    };
    let world = World::new(spec).unwrap();
    let g = build_graph(&record_all(&world, 3, 1), 4, &GraphConfig::default()).unwrap();
    let degrees: Vec<usize> = (0..4).map(|r| g.degree(r)).collect();
    assert_eq!(degrees, vec![1, 2, 2, 1]);
}
