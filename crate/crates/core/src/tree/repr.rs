//! Nested JSON form of a tree:
//!
//! ```json
//! {"kind": "split", "feature": 0, "threshold": 1.5, "left": {...}, "right": {...}}
//! {"kind": "split", "feature": 3, "left_codes": [0, 2], "left": {...}, "right": {...}}
//! {"kind": "leaf", "class": 1, "positive_fraction": 0.8}
//! ```

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Node, SplitRule, Tree};
use crate::data::Class;
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
enum NodeRepr<T> {
    Split {
        feature: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<T>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left_codes: Option<Vec<u32>>,
        left: Box<NodeRepr<T>>,
        right: Box<NodeRepr<T>>,
    },
    Leaf {
        class: Class,
        positive_fraction: T,
    },
}

fn to_repr<T: Scalar>(nodes: &[Node<T>], i: usize) -> NodeRepr<T> {
    match &nodes[i] {
        Node::Leaf {
            class,
            positive_fraction,
        } => NodeRepr::Leaf {
            class: *class,
            positive_fraction: *positive_fraction,
        },
        Node::Split {
            feature,
            rule,
            left,
            right,
        } => {
            let (threshold, left_codes) = match rule {
                SplitRule::Threshold(t) => (Some(*t), None),
                SplitRule::LeftCodes(c) => (None, Some(c.clone())),
            };
            NodeRepr::Split {
                feature: *feature,
                threshold,
                left_codes,
                left: Box::new(to_repr(nodes, *left)),
                right: Box::new(to_repr(nodes, *right)),
            }
        }
    }
}

fn push_repr<T: Scalar>(repr: NodeRepr<T>, nodes: &mut Vec<Node<T>>) -> Result<usize, String> {
    let id = nodes.len();
    match repr {
        NodeRepr::Leaf {
            class,
            positive_fraction,
        } => nodes.push(Node::Leaf {
            class,
            positive_fraction,
        }),
        NodeRepr::Split {
            feature,
            threshold,
            left_codes,
            left,
            right,
        } => {
            let rule = match (threshold, left_codes) {
                (Some(t), None) => SplitRule::Threshold(t),
                (None, Some(c)) => SplitRule::LeftCodes(c),
                _ => return Err("split needs exactly one of `threshold` or `left_codes`".into()),
            };
            nodes.push(Node::Split {
                feature,
                rule,
                left: 0,
                right: 0,
            });
            let l = push_repr(*left, nodes)?;
            let r = push_repr(*right, nodes)?;
            if let Node::Split { left, right, .. } = &mut nodes[id] {
                *left = l;
                *right = r;
            }
        }
    }
    Ok(id)
}

impl<T: Scalar> Serialize for Tree<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        to_repr(&self.nodes, 0).serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Tree<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = NodeRepr::<T>::deserialize(d)?;
        let mut nodes = Vec::new();
        push_repr(repr, &mut nodes).map_err(D::Error::custom)?;
        Tree::from_nodes(nodes).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_nested() {
        let t: Tree<f64> = Tree::from_nodes(vec![
            Node::Split {
                feature: 1,
                rule: SplitRule::Threshold(0.5),
                left: 1,
                right: 2,
            },
            Node::Leaf {
                class: Class::Negative,
                positive_fraction: 0.25,
            },
            Node::Leaf {
                class: Class::Positive,
                positive_fraction: 1.0,
            },
        ])
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"split","feature":1,"threshold":0.5,"left":{"kind":"leaf","class":-1,"positive_fraction":0.25},"right":{"kind":"leaf","class":1,"positive_fraction":1.0}}"#
        );
        let back: Tree<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn ambiguous_split_rejected() {
        let json = r#"{"kind":"split","feature":0,"threshold":1.0,"left_codes":[0],
            "left":{"kind":"leaf","class":1,"positive_fraction":1.0},
            "right":{"kind":"leaf","class":1,"positive_fraction":1.0}}"#;
        assert!(serde_json::from_str::<Tree<f64>>(json).is_err());
    }
}
