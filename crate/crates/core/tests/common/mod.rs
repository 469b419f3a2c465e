#![allow(dead_code)]

use rand::Rng;

/// A small single-valued choice instance: `choices[k]` is picked from
/// `menus[k]`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub n: usize,
    pub menus: Vec<u16>,
    pub choices: Vec<usize>,
}

pub fn random_instance<R: Rng>(rng: &mut R, max_alternatives: usize, max_menus: usize) -> Instance {
    let n = rng.random_range(2..=max_alternatives);
    let m = rng.random_range(1..=max_menus);
    let full = (1u16 << n) - 1;
    let mut menus = Vec::new();
    while menus.len() < m {
        let mask = rng.random_range(1..=full);
        if mask.count_ones() >= 2 {
            menus.push(mask);
        }
    }
    let choices = menus
        .iter()
        .map(|&mask| {
            let members: Vec<usize> = (0..n).filter(|l| mask & (1 << l) != 0).collect();
            members[rng.random_range(0..members.len())]
        })
        .collect();
    Instance { n, menus, choices }
}

/// Whether "chosen beats every other member" over the kept menus has no
/// cycle, checked by repeatedly removing alternatives nothing beats.
fn acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut alive: Vec<bool> = vec![true; n];
    loop {
        let unbeaten = (0..n).find(|&v| alive[v] && !edges.iter().any(|&(a, b)| b == v && alive[a]));
        match unbeaten {
            Some(v) => alive[v] = false,
            None => return alive.iter().all(|a| !a),
        }
    }
}

/// Fewest menus to drop so that the remaining choices are maximal elements
/// of one linear order, by trying every subset of menus.
pub fn hm_oracle(inst: &Instance) -> usize {
    let m = inst.menus.len();
    (0u32..1 << m)
        .filter_map(|keep| {
            let edges: Vec<(usize, usize)> = (0..m)
                .filter(|k| keep & (1 << k) != 0)
                .flat_map(|k| {
                    let x = inst.choices[k];
                    (0..inst.n).filter(move |&y| y != x && inst.menus[k] & (1 << y) != 0).map(move |y| (x, y))
                })
                .collect();
            acyclic(inst.n, &edges).then(|| m - keep.count_ones() as usize)
        })
        .min()
        .expect("dropping every menu is always consistent")
}
