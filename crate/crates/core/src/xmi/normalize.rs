use super::tree::ModelElement;
use crate::grammar::Span;

fn is_node_of_type(e: &ModelElement, ty: &str) -> bool {
    e.local_name() == "node" && e.type_name() == Some(ty)
}

/// Reorders activity content so that each ForkNode precedes its paired
/// JoinNode and, inside every element, `incoming` children come before
/// `outgoing` ones.
///
/// Forks and joins are paired by position: the i-th ForkNode among an
/// element's children with the i-th JoinNode. A join that comes first has
/// its fork moved directly in front of it. Unequal counts are reported and
/// the surplus left in place. Applying the function twice changes nothing
/// further.
pub fn normalize_activity_order(tree: &ModelElement) -> (ModelElement, Vec<(Span, String)>) {
    let mut out = tree.clone();
    let mut notes = Vec::new();
    normalize(&mut out, &mut notes);
    (out, notes)
}

fn normalize(e: &mut ModelElement, notes: &mut Vec<(Span, String)>) {
    order_edges(e);
    pair_forks(e, notes);
    for c in &mut e.children {
        normalize(c, notes);
    }
}

/// Permutes only the incoming/outgoing slots among the children.
fn order_edges(e: &mut ModelElement) {
    let slots: Vec<usize> = (0..e.children.len())
        .filter(|&i| matches!(e.children[i].local_name(), "incoming" | "outgoing"))
        .collect();
    let mut edges: Vec<ModelElement> = slots.iter().map(|&i| e.children[i].clone()).collect();
    // Stable: keeps relative order inside each group.
    edges.sort_by_key(|c| c.local_name() == "outgoing");
    for (slot, edge) in slots.into_iter().zip(edges) {
        e.children[slot] = edge;
    }
}

fn pair_forks(e: &mut ModelElement, notes: &mut Vec<(Span, String)>) {
    let forks = e
        .children
        .iter()
        .filter(|c| is_node_of_type(c, "ForkNode"))
        .count();
    let joins = e
        .children
        .iter()
        .filter(|c| is_node_of_type(c, "JoinNode"))
        .count();
    if forks != joins {
        notes.push((
            e.tags.name,
            format!(
                "{forks} ForkNode(s) but {joins} JoinNode(s) in `{}`; pairing by document order",
                e.qname
            ),
        ));
    }
    for k in 0..forks.min(joins) {
        let nth = |e: &ModelElement, ty: &str| {
            e.children
                .iter()
                .enumerate()
                .filter(|(_, c)| is_node_of_type(c, ty))
                .nth(k)
                .map(|(i, _)| i)
                .expect("counted above")
        };
        let fork = nth(e, "ForkNode");
        let join = nth(e, "JoinNode");
        if join < fork {
            let node = e.children.remove(fork);
            e.children.insert(join, node);
        }
    }
}
