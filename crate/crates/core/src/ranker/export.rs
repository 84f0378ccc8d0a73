//! Human-readable tree renderings.
//!
//! Text form, one block per tree:
//!
//! ```text
//! tree 0 leaves=4
//! d_gen ≤ 0.43 missing=no
//!   yes: leaf 0
//!   no: d_syn ≤ 0.56 missing=no
//!     yes: size_ratio ≤ 1.61 missing=no
//!       yes: leaf 1
//!       no: leaf 3
//!     no: leaf 2
//! ```
//!
//! `missing=yes` means rows lacking the feature take the yes branch. The
//! text form parses back into identical trees via [`parse_text_tree`].

use std::fmt::Write as _;
use std::iter::Peekable;
use std::str::FromStr;

use super::gbdt::GbdtModel;
use super::tree::{Node, RegressionTree};
use crate::dataset::FeatureSchema;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Text,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ExportFormat::Text),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(Error::invalid(format!("unknown export format '{other}'"))),
        }
    }
}

pub fn export_trees(model: &GbdtModel, format: ExportFormat) -> String {
    match format {
        ExportFormat::Text => model
            .trees()
            .iter()
            .enumerate()
            .map(|(k, t)| tree_to_text(k, t, model.schema()))
            .collect(),
        ExportFormat::Dot => ensemble_to_dot(model.trees(), model.schema()),
    }
}

fn describe(node: &Node, schema: &FeatureSchema) -> String {
    match node {
        Node::Leaf { value } => format!("leaf {value}"),
        Node::Split {
            feature,
            threshold,
            missing_goes_left,
            ..
        } => format!(
            "{} ≤ {} missing={}",
            schema.names()[*feature],
            threshold,
            if *missing_goes_left { "yes" } else { "no" }
        ),
    }
}

pub(crate) fn tree_to_text(index: usize, tree: &RegressionTree, schema: &FeatureSchema) -> String {
    fn walk(tree: &RegressionTree, i: usize, depth: usize, prefix: &str, schema: &FeatureSchema, out: &mut String) {
        let node = &tree.nodes()[i];
        let _ = writeln!(out, "{:indent$}{prefix}{}", "", describe(node, schema), indent = 2 * depth);
        if let Node::Split { left, right, .. } = node {
            walk(tree, *left, depth + 1, "yes: ", schema, out);
            walk(tree, *right, depth + 1, "no: ", schema, out);
        }
    }
    let mut out = format!("tree {index} leaves={}\n", tree.leaf_count());
    walk(tree, 0, 0, "", schema, &mut out);
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn ensemble_to_dot(trees: &[RegressionTree], schema: &FeatureSchema) -> String {
    fn walk(tree: &RegressionTree, i: usize, k: usize, next_id: &mut usize, schema: &FeatureSchema, out: &mut String) -> usize {
        let id = *next_id;
        *next_id += 1;
        match &tree.nodes()[i] {
            Node::Leaf { value } => {
                let _ = writeln!(out, "    t{k}n{id} [label=\"output: {value}\", shape=ellipse];");
            }
            Node::Split {
                feature,
                threshold,
                missing_goes_left,
                left,
                right,
                ..
            } => {
                let missing = if *missing_goes_left { "yes" } else { "no" };
                let _ = writeln!(
                    out,
                    "    t{k}n{id} [label=\"{} ≤ {}\\nmissing: {missing}\"];",
                    dot_escape(&schema.names()[*feature]),
                    threshold
                );
                let l = walk(tree, *left, k, next_id, schema, out);
                let r = walk(tree, *right, k, next_id, schema, out);
                let _ = writeln!(out, "    t{k}n{id} -> t{k}n{l} [label=\"yes\"];");
                let _ = writeln!(out, "    t{k}n{id} -> t{k}n{r} [label=\"no\"];");
            }
        }
        id
    }

    let mut out = String::from("digraph ensemble {\n  node [shape=box];\n");
    for (k, t) in trees.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{k} {{\n    label=\"tree {k}\";");
        let mut next_id = 0;
        walk(t, 0, k, &mut next_id, schema, &mut out);
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

struct Line<'a> {
    number: usize,
    indent: usize,
    body: &'a str,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::parse("tree text", line, msg)
}

fn parse_node<'a, I>(lines: &mut Peekable<I>, depth: usize, prefix: &str, schema: &FeatureSchema, out: &mut Vec<Node>) -> Result<usize>
where
    I: Iterator<Item = Line<'a>>,
{
    let line = lines.next().ok_or_else(|| parse_err(0, "unexpected end of tree"))?;
    if line.indent != 2 * depth {
        return Err(parse_err(line.number, format!("expected indentation {}", 2 * depth)));
    }
    let body = line
        .body
        .strip_prefix(prefix)
        .ok_or_else(|| parse_err(line.number, format!("expected '{prefix}'")))?;
    let idx = out.len();
    if let Some(v) = body.strip_prefix("leaf ") {
        let value = v.parse().map_err(|_| parse_err(line.number, format!("invalid leaf value '{v}'")))?;
        out.push(Node::Leaf { value });
        return Ok(idx);
    }
    let (cond, missing) = body
        .rsplit_once(" missing=")
        .ok_or_else(|| parse_err(line.number, "missing 'missing=' marker"))?;
    let missing_goes_left = match missing {
        "yes" => true,
        "no" => false,
        other => return Err(parse_err(line.number, format!("invalid missing marker '{other}'"))),
    };
    let (name, thr) = cond
        .rsplit_once(" ≤ ")
        .ok_or_else(|| parse_err(line.number, "expected '<feature> ≤ <threshold>'"))?;
    let feature = schema
        .index_of(name)
        .ok_or_else(|| parse_err(line.number, format!("unknown feature '{name}'")))?;
    let threshold = thr
        .parse()
        .map_err(|_| parse_err(line.number, format!("invalid threshold '{thr}'")))?;
    out.push(Node::Leaf { value: 0.0 });
    let left = parse_node(lines, depth + 1, "yes: ", schema, out)?;
    let right = parse_node(lines, depth + 1, "no: ", schema, out)?;
    out[idx] = Node::Split {
        feature,
        threshold,
        missing_goes_left,
        gain: 0.0,
        left,
        right,
    };
    Ok(idx)
}

/// Parses the text rendering back into trees. Split gains are not part of
/// the text form and come back as 0.
pub fn parse_text_tree(text: &str, schema: &FeatureSchema) -> Result<Vec<RegressionTree>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let body = l.trim_start_matches(' ');
            Line {
                number: i + 1,
                indent: l.len() - body.len(),
                body,
            }
        })
        .peekable();
    let mut trees = Vec::new();
    while let Some(head) = lines.next() {
        let rest = head
            .body
            .strip_prefix("tree ")
            .ok_or_else(|| parse_err(head.number, "expected 'tree <index> leaves=<n>'"))?;
        let leaves: usize = rest
            .split_once(" leaves=")
            .and_then(|(_, n)| n.parse().ok())
            .ok_or_else(|| parse_err(head.number, "malformed tree header"))?;
        let mut nodes = Vec::new();
        parse_node(&mut lines, 0, "", schema, &mut nodes)?;
        let tree = RegressionTree::from_nodes(nodes).map_err(|e| parse_err(head.number, e))?;
        if tree.leaf_count() != leaves {
            return Err(parse_err(head.number, "leaf count does not match header"));
        }
        trees.push(tree);
    }
    Ok(trees)
}
