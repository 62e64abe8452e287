use std::fmt::Write as _;

use super::{CommError, CommGraph, Edge};

/// Ordered communication rounds; each round is a matching of the graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommSchedule {
    pub rounds: Vec<Vec<Edge>>,
}

impl CommSchedule {
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Peer of `node` in round `r`, if any.
    pub fn peer(&self, r: usize, node: usize) -> Option<usize> {
        self.rounds[r].iter().find_map(|e| e.other(node))
    }

    /// Checks that every round is a matching and the rounds cover the edges
    /// of `graph` exactly once.
    pub fn validate(&self, graph: &CommGraph) -> Result<(), CommError> {
        let mut scheduled: Vec<Edge> = Vec::new();
        for (r, round) in self.rounds.iter().enumerate() {
            let mut busy = vec![false; graph.n_nodes()];
            for e in round {
                for node in [e.i, e.j] {
                    if node >= busy.len() {
                        return Err(CommError::InvalidSchedule(format!("round {} uses unknown node {node}", r + 1)));
                    }
                    if std::mem::replace(&mut busy[node], true) {
                        return Err(CommError::InvalidSchedule(format!(
                            "node {} appears twice in round {}",
                            node + 1,
                            r + 1
                        )));
                    }
                }
                scheduled.push(*e);
            }
        }
        let mut expected = graph.edges().to_vec();
        expected.sort();
        scheduled.sort();
        if expected != scheduled {
            return Err(CommError::InvalidSchedule("rounds do not cover the graph edges exactly once".into()));
        }
        Ok(())
    }
}

/// Greedy round construction.
///
/// Edges are sorted by the larger degree of their endpoints (descending),
/// then by weight (descending), then by `(i, j)`. Each edge in turn joins
/// the earliest round in which both endpoints are still free, opening a new
/// round when there is none.
pub fn greedy_schedule(graph: &CommGraph) -> CommSchedule {
    let deg = graph.degrees();
    let mut edges = graph.edges().to_vec();
    edges.sort_by(|a, b| {
        let da = deg[a.i].max(deg[a.j]);
        let db = deg[b.i].max(deg[b.j]);
        db.cmp(&da)
            .then(b.weight.cmp(&a.weight))
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });
    let mut rounds: Vec<Vec<Edge>> = Vec::new();
    let mut busy: Vec<Vec<bool>> = Vec::new();
    for e in edges {
        let r = match busy.iter().position(|b| !b[e.i] && !b[e.j]) {
            Some(r) => r,
            None => {
                rounds.push(Vec::new());
                busy.push(vec![false; graph.n_nodes()]);
                rounds.len() - 1
            }
        };
        busy[r][e.i] = true;
        busy[r][e.j] = true;
        rounds[r].push(e);
    }
    CommSchedule { rounds }
}

/// One round per line, `(i,j,M)` tuples separated by `, `, 1-based ids.
pub fn format_schedule(schedule: &CommSchedule) -> String {
    let mut out = String::new();
    for round in &schedule.rounds {
        let items: Vec<String> = round
            .iter()
            .map(|e| format!("({},{},{})", e.i + 1, e.j + 1, e.weight))
            .collect();
        let _ = writeln!(out, "{}", items.join(", "));
    }
    out
}

fn parse_tuples(line: &str, lineno: usize) -> Result<Vec<Edge>, CommError> {
    let err = |message: String| CommError::Parse { line: lineno, message };
    let mut edges = Vec::new();
    let mut rest = line.trim();
    while !rest.is_empty() {
        rest = rest.trim_start_matches([',', ' ', '\t']);
        if rest.is_empty() {
            break;
        }
        let Some(body) = rest.strip_prefix('(') else {
            return Err(err(format!("expected `(` at `{rest}`")));
        };
        let Some(end) = body.find(')') else {
            return Err(err("unterminated tuple".into()));
        };
        let nums: Vec<&str> = body[..end].split(',').map(str::trim).collect();
        if nums.len() != 3 {
            return Err(err(format!("tuple `({})` needs three entries", &body[..end])));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| err(format!("invalid number `{s}`")));
        let (i, j, w) = (parse(nums[0])?, parse(nums[1])?, parse(nums[2])?);
        if i == 0 || j == 0 {
            return Err(err("node ids start at 1".into()));
        }
        edges.push(Edge::new(i - 1, j - 1, w));
        rest = &body[end + 1..];
    }
    Ok(edges)
}

/// Reads a schedule written by [`format_schedule`].
pub fn parse_schedule(text: &str) -> Result<CommSchedule, CommError> {
    let mut rounds = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rounds.push(parse_tuples(line, n + 1)?);
    }
    Ok(CommSchedule { rounds })
}

/// Reads an edge list: one edge per line as `i j M` (whitespace or comma
/// separated) or as `(i,j,M)` tuples, 1-based ids, `#` comments.
pub fn parse_graph(text: &str) -> Result<CommGraph, CommError> {
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('(') {
            edges.extend(parse_tuples(line, n + 1)?);
            continue;
        }
        let tok: Vec<&str> = line.split([' ', '\t', ',']).filter(|s| !s.is_empty()).collect();
        if tok.len() != 3 {
            return Err(CommError::Parse {
                line: n + 1,
                message: "expected `i j M`".into(),
            });
        }
        let mut v = [0usize; 3];
        for (slot, t) in v.iter_mut().zip(&tok) {
            *slot = t.parse().map_err(|_| CommError::Parse {
                line: n + 1,
                message: format!("invalid number `{t}`"),
            })?;
        }
        if v[0] == 0 || v[1] == 0 {
            return Err(CommError::Parse {
                line: n + 1,
                message: "node ids start at 1".into(),
            });
        }
        edges.push(Edge::new(v[0] - 1, v[1] - 1, v[2]));
    }
    let n_nodes = edges.iter().map(|e| e.j + 1).max().unwrap_or(0);
    CommGraph::new(n_nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let g = CommGraph::new(2, vec![Edge::new(0, 1, 5)]).unwrap();
        let s = greedy_schedule(&g);
        assert_eq!(s.rounds, vec![vec![Edge::new(0, 1, 5)]]);
        s.validate(&g).unwrap();
    }

    #[test]
    fn star_needs_one_round_per_edge() {
        let g = CommGraph::new(5, (1..5).map(|k| Edge::new(0, k, k)).collect()).unwrap();
        let s = greedy_schedule(&g);
        assert_eq!(s.n_rounds(), 4);
        assert!(s.rounds.iter().all(|r| r.len() == 1 && r[0].touches(0)));
    }

    #[test]
    fn text_round_trip() {
        let g = parse_graph("1 2 10\n2 3 5 # comment\n(3,4,7)\n").unwrap();
        assert_eq!(g.n_nodes(), 4);
        let s = greedy_schedule(&g);
        let text = format_schedule(&s);
        assert_eq!(parse_schedule(&text).unwrap(), s);
        assert!(parse_graph("1 2\n").is_err());
        assert!(parse_graph("0 2 1\n").is_err());
        assert!(matches!(parse_schedule("(1,2,3), (4,5\n"), Err(CommError::Parse { line: 1, .. })));
    }

    #[test]
    fn validation_catches_conflicts() {
        let g = CommGraph::new(3, vec![Edge::new(0, 1, 1), Edge::new(1, 2, 1)]).unwrap();
        let bad = CommSchedule {
            rounds: vec![vec![Edge::new(0, 1, 1), Edge::new(1, 2, 1)]],
        };
        assert!(bad.validate(&g).is_err());
        let missing = CommSchedule {
            rounds: vec![vec![Edge::new(0, 1, 1)]],
        };
        assert!(missing.validate(&g).is_err());
    }
}
