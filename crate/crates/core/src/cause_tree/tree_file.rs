//! Indented cause-tree text format, one node per line:
//!
//! ```text
//! # comment
//! TOP OR "Collision with oncoming traffic"
//!   L1 LEAF "Latent learning problem" class=near_motorway share=0.6
//!   L2 LEAF "Stale map" class=stale_map share=0.4
//! ```
//!
//! Children are indented two spaces deeper than their parent and keep their
//! order. Labels are double-quoted with `\"` and `\\` escapes.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{CauseTree, CtaNode, Gate, StructuralFinding};
use crate::scalar::Scalar;

const INDENT: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("tree cannot be written: {0:?}")]
    NotATree(Vec<StructuralFinding>),
}

fn syntax(line: usize, message: impl Into<String>) -> TreeParseError {
    TreeParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_label(rest: &str, line: usize) -> Result<(String, &str), TreeParseError> {
    let mut chars = rest.char_indices();
    match chars.next() {
        Some((_, '"')) => {}
        _ => return Err(syntax(line, "expected a double-quoted label")),
    }
    let mut label = String::new();
    let mut escaped = false;
    for (i, ch) in chars {
        if escaped {
            label.push(ch);
            escaped = false;
        } else if ch == '\\' {
            escaped = true;
        } else if ch == '"' {
            return Ok((label, &rest[i + 1..]));
        } else {
            label.push(ch);
        }
    }
    Err(syntax(line, "unterminated label"))
}

pub fn parse_tree<T: Scalar>(text: &str) -> Result<CauseTree<T>, TreeParseError> {
    let mut root: Option<String> = None;
    let mut nodes: Vec<CtaNode<T>> = Vec::new();
    // (depth, index into nodes) of the current ancestor chain.
    let mut chain: Vec<(usize, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim_start_matches(' ');
        if content.trim().is_empty() || content.starts_with('#') {
            continue;
        }
        let indent = raw.len() - content.len();
        if indent % INDENT != 0 || content.starts_with('\t') {
            return Err(syntax(line, "indentation must be a multiple of two spaces"));
        }
        let depth = indent / INDENT;

        let mut parts = content.splitn(3, ' ');
        let id = parts.next().unwrap_or_default();
        let gate = match parts.next() {
            Some("AND") => Gate::And,
            Some("OR") => Gate::Or,
            Some("LEAF") => Gate::Leaf,
            Some(other) => return Err(syntax(line, format!("unknown gate '{other}'"))),
            None => return Err(syntax(line, "expected '<id> <gate> \"label\"'")),
        };
        let (label, tail) = parse_label(parts.next().unwrap_or_default().trim_start(), line)?;

        let mut node = CtaNode {
            id: id.to_string(),
            label,
            gate,
            children: Vec::new(),
            scenario_class: None,
            exposure_share: None,
        };
        for attr in tail.split_whitespace() {
            let (key, value) = attr
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected key=value, got '{attr}'")))?;
            match key {
                "class" => node.scenario_class = Some(value.to_string()),
                "share" => {
                    let share = T::from_str(value)
                        .map_err(|_| syntax(line, format!("bad share '{value}'")))?;
                    node.exposure_share = Some(share);
                }
                other => return Err(syntax(line, format!("unknown attribute '{other}'"))),
            }
        }

        while chain.last().is_some_and(|&(d, _)| d >= depth) {
            chain.pop();
        }
        match chain.last() {
            None if depth == 0 && root.is_none() => root = Some(node.id.clone()),
            None if depth == 0 => return Err(syntax(line, "more than one root")),
            None => return Err(syntax(line, "indented line without a parent")),
            Some(&(d, parent)) => {
                if depth != d + 1 {
                    return Err(syntax(line, "indentation skips a level"));
                }
                nodes[parent].children.push(node.id.clone());
            }
        }
        if nodes.iter().any(|n| n.id == node.id) {
            return Err(syntax(line, format!("duplicate node id '{}'", node.id)));
        }
        chain.push((depth, nodes.len()));
        nodes.push(node);
    }

    let root = root.ok_or_else(|| syntax(0, "empty tree"))?;
    Ok(CauseTree::new(&root, nodes))
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn write_tree<T: Scalar>(tree: &CauseTree<T>) -> Result<String, TreeParseError> {
    let findings: Vec<_> = tree
        .validate()
        .into_iter()
        .filter(|f| {
            !matches!(
                f,
                StructuralFinding::LeafWithoutClass { .. }
                    | StructuralFinding::ShareOutOfRange { .. }
                    | StructuralFinding::AnnotatedGate { .. }
                    | StructuralFinding::GateWithoutChildren { .. }
            )
        })
        .collect();
    if !findings.is_empty() {
        return Err(TreeParseError::NotATree(findings));
    }

    let mut out = String::new();
    let mut stack = vec![(tree.root.as_str(), 0usize)];
    while let Some((id, depth)) = stack.pop() {
        let node = &tree.nodes[id];
        let _ = write!(
            out,
            "{:indent$}{} {} \"{}\"",
            "",
            node.id,
            node.gate.token(),
            escape(&node.label),
            indent = depth * INDENT
        );
        if let Some(class) = &node.scenario_class {
            let _ = write!(out, " class={class}");
        }
        if let Some(share) = node.exposure_share {
            let _ = write!(out, " share={share}");
        }
        out.push('\n');
        for child in node.children.iter().rev() {
            stack.push((child.as_str(), depth + 1));
        }
    }
    Ok(out)
}

impl<T: Scalar> FromStr for CauseTree<T> {
    type Err = TreeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tree(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = r#"# sample
TOP OR "Collision with \"oncoming\" traffic"
  G1 AND "both"
    A LEAF "a" class=X share=0.25
    B LEAF "b\\c" class=Y share=0.25
  C LEAF "c" class=X share=0.5
"#;

    #[test]
    fn parses_structure() {
        let t: CauseTree<f64> = parse_tree(SAMPLE).unwrap();
        assert_eq!(t.root, "TOP");
        assert_eq!(t.nodes["TOP"].children, vec!["G1", "C"]);
        assert_eq!(t.nodes["G1"].gate, Gate::And);
        assert_eq!(t.nodes["TOP"].label, "Collision with \"oncoming\" traffic");
        assert_eq!(t.nodes["B"].label, "b\\c");
        assert_eq!(t.nodes["C"].exposure_share, Some(0.5));
        assert!(t.validate().is_empty());
    }

    #[test]
    fn writes_back_identically() {
        let t: CauseTree<f64> = parse_tree(SAMPLE).unwrap();
        let text = write_tree(&t).unwrap();
        assert_eq!(text, SAMPLE.trim_start_matches("# sample\n"));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = parse_tree::<f64>("A OR \"x\"\n   B LEAF \"b\"\n").unwrap_err();
        assert!(matches!(e, TreeParseError::Syntax { line: 2, .. }));
        let e = parse_tree::<f64>("A XOR \"x\"\n").unwrap_err();
        assert!(matches!(e, TreeParseError::Syntax { line: 1, .. }));
        let e = parse_tree::<f64>("A OR \"x\"\nB OR \"y\"\n").unwrap_err();
        assert!(matches!(e, TreeParseError::Syntax { line: 2, .. }));
        let e = parse_tree::<f64>("A OR \"x\"\n    B LEAF \"b\"\n").unwrap_err();
        assert!(matches!(e, TreeParseError::Syntax { line: 2, .. }));
        let e = parse_tree::<f64>("A LEAF \"x\" share=abc\n").unwrap_err();
        assert!(matches!(e, TreeParseError::Syntax { line: 1, .. }));
    }

    fn arb_label() -> impl Strategy<Value = String> {
        "[ -~]{0,12}"
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            labels in proptest::collection::vec(arb_label(), 4),
            shares in proptest::collection::vec(0.0f64..=1.0, 3),
            and_gate in any::<bool>(),
        ) {
            let gate = if and_gate { Gate::And } else { Gate::Or };
            let t = CauseTree::new("r", [
                CtaNode::gate("r", &labels[0], Gate::Or, &["g", "c"]),
                CtaNode::gate("g", &labels[1], gate, &["a", "b"]),
                CtaNode::leaf("a", &labels[2], "X", Some(shares[0])),
                CtaNode::leaf("b", &labels[3], "Y", Some(shares[1])),
                CtaNode::leaf("c", "", "Z", Some(shares[2])),
            ]);
            let back: CauseTree<f64> = parse_tree(&write_tree(&t).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
