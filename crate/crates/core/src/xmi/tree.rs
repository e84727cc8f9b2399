use std::collections::HashSet;

use serde::Serialize;

use super::token::{XmiToken, XmiTokenKind};
use super::XmiError;
use crate::grammar::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attribute {
    pub name: String,
    pub value: String,
    pub name_span: Span,
    /// Includes the quotes.
    pub value_span: Span,
}

/// Source positions of an element's tag tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TagSpans {
    pub open: Span,
    pub name: Span,
    /// `>` or `/>` ending the start tag.
    pub open_end: Span,
    /// `</`, name and `>` of the end tag; absent for self-closing elements.
    pub close: Option<(Span, Span, Span)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelElement {
    pub qname: String,
    pub xmi_type: Option<String>,
    pub xmi_id: Option<String>,
    pub attributes: Vec<Attribute>,
    pub children: Vec<ModelElement>,
    /// Character data, for elements without children.
    pub text: Option<(String, Span)>,
    /// From the start of the start tag to the end of the end tag.
    pub span: Span,
    pub tags: TagSpans,
}

impl ModelElement {
    /// Element name without its namespace prefix.
    pub fn local_name(&self) -> &str {
        local(&self.qname)
    }

    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.value.as_str())
    }

    pub fn name(&self) -> Option<&str> {
        self.attribute("name")
    }

    /// `xmi:type` without the `uml:` prefix.
    pub fn type_name(&self) -> Option<&str> {
        self.xmi_type.as_deref().map(strip_uml)
    }

    pub fn is_self_closing(&self) -> bool {
        self.tags.close.is_none()
    }

    /// Depth-first, parents before children.
    pub fn walk(&self) -> Vec<&ModelElement> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            out.push(e);
            stack.extend(e.children.iter().rev());
        }
        out
    }

    pub fn find_by_id(&self, id: &str) -> Option<&ModelElement> {
        self.walk()
            .into_iter()
            .find(|e| e.xmi_id.as_deref() == Some(id))
    }

    /// Serializes the element back to XML, one element per line.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        self.write_xml(&mut out, 0);
        out
    }

    fn write_xml(&self, out: &mut String, depth: usize) {
        let indent = "  ".repeat(depth);
        out.push_str(&indent);
        out.push('<');
        out.push_str(&self.qname);
        for a in &self.attributes {
            let q = if a.value.contains('"') { '\'' } else { '"' };
            out.push_str(&format!(" {}={q}{}{q}", a.name, a.value));
        }
        if self.is_self_closing() {
            out.push_str("/>\n");
            return;
        }
        out.push('>');
        if let Some((text, _)) = &self.text {
            out.push_str(text);
        } else {
            out.push('\n');
            for c in &self.children {
                c.write_xml(out, depth + 1);
            }
            out.push_str(&indent);
        }
        out.push_str(&format!("</{}>\n", self.qname));
    }
}

pub(crate) fn local(qname: &str) -> &str {
    qname.rsplit_once(':').map_or(qname, |(_, l)| l)
}

/// Removes a `uml:` prefix; other prefixes are kept.
pub fn strip_uml(name: &str) -> &str {
    name.strip_prefix("uml:").unwrap_or(name)
}

/// Builds the element tree from a token stream.
pub fn build_tree(src: &str, tokens: &[XmiToken]) -> Result<ModelElement, XmiError> {
    let err = |offset: usize, msg: &str| XmiError::malformed(src, offset, msg);
    let mut stack: Vec<ModelElement> = Vec::new();
    let mut root: Option<ModelElement> = None;
    let mut ids: HashSet<String> = HashSet::new();
    let mut i = 0;
    let at = |i: usize| tokens.get(i).map_or(src.len(), |t| t.span.start);

    while i < tokens.len() {
        let t = &tokens[i];
        match (t.kind, t.text.as_str()) {
            (XmiTokenKind::AngleOpen, "<") => {
                if root.is_some() && stack.is_empty() {
                    return Err(err(t.span.start, "content after the root element"));
                }
                let name = tokens
                    .get(i + 1)
                    .filter(|n| n.kind == XmiTokenKind::Name)
                    .ok_or_else(|| err(at(i + 1), "expected element name"))?;
                let mut e = ModelElement {
                    qname: name.text.clone(),
                    xmi_type: None,
                    xmi_id: None,
                    attributes: Vec::new(),
                    children: Vec::new(),
                    text: None,
                    span: t.span,
                    tags: TagSpans {
                        open: t.span,
                        name: name.span,
                        ..TagSpans::default()
                    },
                };
                i += 2;
                while let (Some(n), Some(v)) = (tokens.get(i), tokens.get(i + 1)) {
                    if n.kind != XmiTokenKind::Name {
                        break;
                    }
                    if v.kind != XmiTokenKind::QuotedValue {
                        return Err(err(v.span.start, "expected attribute value"));
                    }
                    if e.attributes.iter().any(|a| a.name == n.text) {
                        return Err(err(
                            n.span.start,
                            &format!("duplicate attribute `{}`", n.text),
                        ));
                    }
                    match n.text.as_str() {
                        "xmi:type" => e.xmi_type = Some(v.text.clone()),
                        "xmi:id" => {
                            if !ids.insert(v.text.clone()) {
                                return Err(err(
                                    v.span.start,
                                    &format!("duplicate xmi:id `{}`", v.text),
                                ));
                            }
                            e.xmi_id = Some(v.text.clone());
                        }
                        _ => {}
                    }
                    e.attributes.push(Attribute {
                        name: n.text.clone(),
                        value: v.text.clone(),
                        name_span: n.span,
                        value_span: v.span,
                    });
                    i += 2;
                }
                let end = tokens
                    .get(i)
                    .ok_or_else(|| err(src.len(), "unexpected end of input"))?;
                e.tags.open_end = end.span;
                e.span = t.span.cover(&end.span);
                i += 1;
                match end.kind {
                    XmiTokenKind::SlashClose => attach(&mut stack, &mut root, e),
                    XmiTokenKind::AngleClose => stack.push(e),
                    _ => return Err(err(end.span.start, "expected `>` or `/>`")),
                }
            }
            (XmiTokenKind::AngleOpen, _) => {
                let name = tokens
                    .get(i + 1)
                    .filter(|n| n.kind == XmiTokenKind::Name)
                    .ok_or_else(|| err(at(i + 1), "expected element name"))?;
                let close = tokens
                    .get(i + 2)
                    .filter(|c| c.kind == XmiTokenKind::AngleClose)
                    .ok_or_else(|| err(at(i + 2), "expected `>`"))?;
                let mut e = stack.pop().ok_or_else(|| {
                    err(t.span.start, &format!("unmatched end tag `{}`", name.text))
                })?;
                if e.qname != name.text {
                    return Err(err(
                        name.span.start,
                        &format!("end tag `{}` does not match `{}`", name.text, e.qname),
                    ));
                }
                e.tags.close = Some((t.span, name.span, close.span));
                e.span = e.span.cover(&close.span);
                attach(&mut stack, &mut root, e);
                i += 3;
            }
            (XmiTokenKind::Literal, _) => {
                let Some(parent) = stack.last_mut() else {
                    return Err(err(t.span.start, "text outside the root element"));
                };
                if parent.text.is_some() {
                    return Err(err(t.span.start, "mixed content is not supported"));
                }
                parent.text = Some((t.text.clone(), t.span));
                i += 1;
            }
            _ => return Err(err(t.span.start, &format!("unexpected `{}`", t.text))),
        }
        if let Some(p) = stack.last() {
            if p.text.is_some() && !p.children.is_empty() {
                return Err(err(t.span.start, "mixed content is not supported"));
            }
        }
    }
    if let Some(open) = stack.last() {
        return Err(err(
            open.span.start,
            &format!("element `{}` is never closed", open.qname),
        ));
    }
    root.ok_or_else(|| err(0, "document has no root element"))
}

fn attach(stack: &mut [ModelElement], root: &mut Option<ModelElement>, e: ModelElement) {
    match stack.last_mut() {
        Some(parent) => parent.children.push(e),
        None => *root = Some(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xmi::tokenize_xmi;

    fn tree(src: &str) -> Result<ModelElement, XmiError> {
        build_tree(src, &tokenize_xmi(src)?)
    }

    #[test]
    fn builds_nested_elements() {
        let src = r#"<uml:Package xmi:id="p" name="Root"><packagedElement xmi:type="uml:Class" xmi:id="c" name="A"/><body>hi</body></uml:Package>"#;
        let root = tree(src).unwrap();
        assert_eq!(root.local_name(), "Package");
        assert_eq!(root.name(), Some("Root"));
        assert_eq!(root.children.len(), 2);
        let class = &root.children[0];
        assert_eq!(class.type_name(), Some("Class"));
        assert_eq!(class.xmi_id.as_deref(), Some("c"));
        assert!(class.is_self_closing());
        assert_eq!(root.children[1].text.as_ref().unwrap().0, "hi");
        assert_eq!(root.span, Span::new(0, src.len()));
        assert_eq!(root.find_by_id("c").unwrap().name(), Some("A"));
        assert_eq!(root.walk().len(), 3);
    }

    #[test]
    fn structural_errors() {
        assert!(tree("").is_err());
        assert!(tree("<a><b></a>").is_err());
        assert!(tree("<a>").is_err());
        assert!(tree("<a/><b/>").is_err());
        assert!(tree("</a>").is_err());
        assert!(tree("<a xmi:id='x'><b xmi:id='x'/></a>").is_err());
        assert!(tree("<a x='1' x='2'/>").is_err());
        assert!(tree("<a>t<b/></a>").is_err());
    }

    #[test]
    fn xml_round_trip() {
        let src = "<a xmi:id='1' v='x\"y'><b>t</b><c/></a>";
        let t = tree(src).unwrap();
        let again = tree(&t.to_xml()).unwrap();
        assert_eq!(again.to_xml(), t.to_xml());
        assert_eq!(again.children[0].text.as_ref().unwrap().0, "t");
        assert_eq!(again.attribute("v"), Some("x\"y"));
    }
}
