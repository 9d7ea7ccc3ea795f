//! Seeded synthetic data: interaction graphs, planted-cluster sessions,
//! item catalogs and random filter queries.

use std::fmt::Write as _;

use crate::graph::Hyperedge;
use crate::hashing::{stream, CounterRng};
use crate::iql::{
    AttrType, CatalogSchema, CmpOp, Expr, ItemRecord, ListOperand, Literal, Operand, Value,
};

/// An ordered list of item ids observed in one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub items: Vec<String>,
}

fn rng(seed: u64, salt: u64) -> CounterRng {
    CounterRng::new(
        seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        stream::SYNTH,
    )
}

/// Random hyperedges over `n_nodes` labels `n{i}`, each with 2..=max_arity
/// distinct members.
pub fn random_hyperedges(
    n_nodes: usize,
    n_edges: usize,
    max_arity: usize,
    seed: u64,
) -> Vec<Hyperedge> {
    assert!(n_nodes >= 2 && max_arity >= 2);
    let mut r = rng(seed, 1);
    (0..n_edges)
        .map(|_| {
            let arity = 2 + r.next_below((max_arity - 1) as u64) as usize;
            let mut labels: Vec<String> = Vec::with_capacity(arity);
            while labels.len() < arity.min(n_nodes) {
                let l = format!("n{}", r.next_below(n_nodes as u64));
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
            Hyperedge::from_labels(&labels, 1.0).expect("valid synthetic edge")
        })
        .collect()
}

/// The same edges as tab-separated interaction lines.
pub fn interactions_tsv(edges: &[Hyperedge]) -> String {
    let mut out = String::new();
    for e in edges {
        let labels: Vec<&str> = e.nodes().iter().map(|n| n.as_str()).collect();
        out.push_str(&labels.join("\t"));
        out.push('\n');
    }
    out
}

/// Sessions that wander locally inside one cluster of items.
///
/// Items of cluster `c` sit on a ring; a session starts at a random item
/// and each next item is 1..=max_step positions further along the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedClusters {
    pub n_clusters: usize,
    pub items_per_cluster: usize,
    pub n_sessions: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_step: usize,
    pub seed: u64,
}

impl Default for PlantedClusters {
    fn default() -> Self {
        Self {
            n_clusters: 5,
            items_per_cluster: 200,
            n_sessions: 5000,
            min_len: 4,
            max_len: 8,
            max_step: 3,
            seed: 0,
        }
    }
}

impl PlantedClusters {
    pub fn n_items(&self) -> usize {
        self.n_clusters * self.items_per_cluster
    }

    pub fn item_label(&self, cluster: usize, position: usize) -> String {
        format!(
            "i{:05}",
            cluster * self.items_per_cluster + position % self.items_per_cluster
        )
    }

    pub fn cluster_of(&self, label: &str) -> Option<usize> {
        let id: usize = label.strip_prefix('i')?.parse().ok()?;
        (id < self.n_items()).then(|| id / self.items_per_cluster)
    }

    pub fn all_items(&self) -> Vec<String> {
        (0..self.n_items()).map(|i| format!("i{i:05}")).collect()
    }

    pub fn sessions(&self) -> Vec<Session> {
        let mut r = rng(self.seed, 2);
        (0..self.n_sessions)
            .map(|s| {
                let cluster = r.next_below(self.n_clusters as u64) as usize;
                let len =
                    self.min_len + r.next_below((self.max_len - self.min_len + 1) as u64) as usize;
                let mut pos = r.next_below(self.items_per_cluster as u64) as usize;
                let mut items = Vec::with_capacity(len);
                for _ in 0..len {
                    items.push(self.item_label(cluster, pos));
                    pos += 1 + r.next_below(self.max_step as u64) as usize;
                }
                Session {
                    id: format!("s{s}"),
                    items,
                }
            })
            .collect()
    }
}

/// `session_id TAB item_id TAB timestamp` lines, one per event.
pub fn sessions_tsv(sessions: &[Session]) -> String {
    let mut out = String::new();
    for (s_no, s) in sessions.iter().enumerate() {
        for (i, item) in s.items.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}",
                s.id,
                item,
                1_600_000_000 + s_no * 1000 + i
            )
            .unwrap();
        }
    }
    out
}

/// Random user histories over `n_items` items where each user mostly stays
/// within one of `n_groups` item groups.
pub fn grouped_users(
    n_users: usize,
    n_items: usize,
    n_groups: usize,
    history: usize,
    seed: u64,
) -> Vec<Session> {
    let mut r = rng(seed, 3);
    let group_size = n_items / n_groups;
    (0..n_users)
        .map(|u| {
            let g = r.next_below(n_groups as u64) as usize;
            let items = (0..history)
                .map(|_| {
                    let id = if r.next_f64() < 0.9 {
                        g * group_size + r.next_below(group_size as u64) as usize
                    } else {
                        r.next_below(n_items as u64) as usize
                    };
                    format!("m{id:05}")
                })
                .collect();
            Session {
                id: format!("u{u}"),
                items,
            }
        })
        .collect()
}

const BRANDS: [&str; 12] = [
    "acme", "globex", "initech", "umbrella", "hooli", "stark", "wayne", "tyrell", "wonka",
    "soylent", "zenith", "oscorp",
];
const COLORS: [&str; 8] = [
    "red", "blue", "green", "black", "white", "gray", "yellow", "navy",
];
const WORDS: [&str; 16] = [
    "usb", "cable", "lamp", "desk", "chair", "mug", "phone", "case", "mini", "pro", "max", "steel",
    "wood", "led", "soft", "red",
];

/// Schema of [`random_catalog`].
pub fn catalog_schema() -> CatalogSchema {
    CatalogSchema::new([
        ("price".to_string(), AttrType::Numeric),
        ("rating".to_string(), AttrType::Numeric),
        ("brand".to_string(), AttrType::String),
        ("color".to_string(), AttrType::String),
        ("title".to_string(), AttrType::String),
        ("tags".to_string(), AttrType::StringList),
        ("in_stock".to_string(), AttrType::Boolean),
        ("featured".to_string(), AttrType::Boolean),
    ])
    .expect("static schema")
}

fn pick<'a>(r: &mut CounterRng, from: &[&'a str]) -> &'a str {
    from[r.next_below(from.len() as u64) as usize]
}

fn random_price(r: &mut CounterRng) -> f64 {
    r.next_below(2000) as f64 / 4.0
}

fn random_rating(r: &mut CounterRng) -> f64 {
    1.0 + r.next_below(9) as f64 / 2.0
}

/// Items `p0, p1, ...` with each attribute null 10% of the time.
pub fn random_catalog(n_items: usize, seed: u64) -> (CatalogSchema, Vec<ItemRecord>) {
    let schema = catalog_schema();
    let mut r = rng(seed, 4);
    let records = (0..n_items)
        .map(|i| {
            let values = schema
                .attrs()
                .iter()
                .map(|(name, _)| {
                    if r.next_f64() < 0.1 {
                        return None;
                    }
                    Some(match name.as_str() {
                        "price" => Value::Number(random_price(&mut r)),
                        "rating" => Value::Number(random_rating(&mut r)),
                        "brand" => Value::Str(pick(&mut r, &BRANDS).into()),
                        "color" => Value::Str(pick(&mut r, &COLORS).into()),
                        "title" => {
                            let n = 1 + r.next_below(3) as usize;
                            Value::Str(
                                (0..n)
                                    .map(|_| pick(&mut r, &WORDS))
                                    .collect::<Vec<_>>()
                                    .join(" "),
                            )
                        }
                        "tags" => {
                            let n = r.next_below(4) as usize;
                            Value::List((0..n).map(|_| pick(&mut r, &WORDS).to_string()).collect())
                        }
                        _ => Value::Bool(r.next_f64() < 0.5),
                    })
                })
                .collect();
            ItemRecord {
                id: format!("p{i}"),
                values,
            }
        })
        .collect();
    (schema, records)
}

fn attr(name: &str) -> Operand {
    Operand::attr(name)
}

fn op(r: &mut CounterRng, ordering: bool) -> CmpOp {
    let all = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];
    if ordering {
        all[r.next_below(6) as usize]
    } else {
        all[r.next_below(2) as usize]
    }
}

fn random_leaf(r: &mut CounterRng) -> Expr {
    let num_attr = |r: &mut CounterRng| {
        if r.next_f64() < 0.5 {
            "price"
        } else {
            "rating"
        }
    };
    let num_lit = |r: &mut CounterRng, a: &str| {
        if a == "price" {
            random_price(r)
        } else {
            random_rating(r)
        }
    };
    let str_attr = |r: &mut CounterRng| pick(r, &["brand", "color", "title"]);
    let str_lit = |r: &mut CounterRng, a: &str| match a {
        "brand" => pick(r, &BRANDS).to_string(),
        "color" => pick(r, &COLORS).to_string(),
        _ => pick(r, &WORDS).to_string(),
    };
    match r.next_below(11) {
        0 => {
            let a = num_attr(r);
            let v = num_lit(r, a);
            let o = op(r, true);
            if r.next_f64() < 0.3 {
                Expr::cmp(Operand::num(v), o, attr(a))
            } else {
                Expr::cmp(attr(a), o, Operand::num(v))
            }
        }
        1 => Expr::cmp(attr("price"), op(r, true), attr("rating")),
        2 => {
            let a = str_attr(r);
            let s = str_lit(r, a);
            Expr::cmp(attr(a), op(r, false), Operand::str(&s))
        }
        3 => Expr::cmp(
            attr("brand"),
            op(r, false),
            attr(if r.next_f64() < 0.5 { "color" } else { "title" }),
        ),
        4 => {
            let a = num_attr(r);
            let n = r.next_below(4);
            let items = (0..n).map(|_| Literal::Number(num_lit(r, a))).collect();
            Expr::In {
                lhs: attr(a),
                rhs: ListOperand::List(items),
            }
        }
        5 => {
            let a = str_attr(r);
            let n = r.next_below(4);
            let items = (0..n).map(|_| Literal::Str(str_lit(r, a))).collect();
            Expr::In {
                lhs: attr(a),
                rhs: ListOperand::List(items),
            }
        }
        6 => {
            let lhs = if r.next_f64() < 0.7 {
                Operand::str(pick(r, &WORDS))
            } else {
                attr(str_attr(r))
            };
            Expr::In {
                lhs,
                rhs: ListOperand::Attr(crate::iql::Attr::new("tags")),
            }
        }
        7 => Expr::Contains {
            lhs: attr("tags"),
            rhs: Operand::str(pick(r, &WORDS)),
        },
        8 => {
            let needle: String = {
                let w = pick(r, &WORDS);
                let cut = 1 + r.next_below(w.len() as u64) as usize;
                w[..cut].to_string()
            };
            match r.next_below(3) {
                0 => Expr::Contains {
                    lhs: attr("title"),
                    rhs: Operand::str(&needle),
                },
                1 => Expr::Contains {
                    lhs: Operand::str("steel usb cable"),
                    rhs: attr("title"),
                },
                _ => Expr::Contains {
                    lhs: attr("title"),
                    rhs: attr("color"),
                },
            }
        }
        9 => {
            let a = if r.next_f64() < 0.5 {
                "in_stock"
            } else {
                "featured"
            };
            match r.next_below(4) {
                0 => Expr::attr(a),
                1 => Expr::cmp(
                    attr(a),
                    op(r, false),
                    Operand::Lit(Literal::Bool(r.next_f64() < 0.5)),
                ),
                2 => Expr::cmp(attr("in_stock"), op(r, false), attr("featured")),
                _ => {
                    let items = (0..r.next_below(3))
                        .map(|_| Literal::Bool(r.next_f64() < 0.5))
                        .collect();
                    Expr::In {
                        lhs: attr(a),
                        rhs: ListOperand::List(items),
                    }
                }
            }
        }
        _ => Expr::cmp(
            attr(num_attr(r)),
            op(r, true),
            Operand::num(-1.0 + r.next_below(3) as f64),
        ),
    }
}

/// A random well-typed query over [`catalog_schema`] with logical nesting
/// up to `depth`.
pub fn random_query(r: &mut CounterRng, depth: usize) -> Expr {
    if depth == 0 || r.next_f64() < 0.3 {
        return random_leaf(r);
    }
    match r.next_below(3) {
        0 => Expr::and(random_query(r, depth - 1), random_query(r, depth - 1)),
        1 => Expr::or(random_query(r, depth - 1), random_query(r, depth - 1)),
        _ => Expr::not(random_query(r, depth - 1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iql::{parse, typecheck};

    #[test]
    fn planted_sessions_stay_in_cluster() {
        let p = PlantedClusters {
            n_sessions: 50,
            ..Default::default()
        };
        let sessions = p.sessions();
        assert_eq!(sessions, p.sessions());
        for s in &sessions {
            assert!((4..=8).contains(&s.items.len()));
            let c = p.cluster_of(&s.items[0]).unwrap();
            assert!(s.items.iter().all(|i| p.cluster_of(i) == Some(c)));
        }
        assert_eq!(
            sessions_tsv(&sessions[..1]).lines().count(),
            sessions[0].items.len()
        );
    }

    #[test]
    fn random_edges_are_valid() {
        let e = random_hyperedges(30, 100, 4, 3);
        assert_eq!(e.len(), 100);
        assert!(e.iter().all(|h| (2..=4).contains(&h.cardinality())));
        assert_eq!(interactions_tsv(&e).lines().count(), 100);
    }

    #[test]
    fn random_queries_parse_and_typecheck() {
        let schema = catalog_schema();
        let mut r = CounterRng::new(1, 2);
        for _ in 0..300 {
            let q = random_query(&mut r, 4);
            let back = parse(&q.to_string()).unwrap();
            assert_eq!(back, q);
            typecheck(&back, &schema).unwrap();
        }
    }
}
