//! Language-neutral assembly of syntax items into non-overlapping segments.
//!
//! A language front end emits [`Item`]s (definitions, statements, comments)
//! in source order; [`assemble`] attaches leading comments to the definition
//! right below them, folds runs of loose statements into module-level or
//! class-body segments, and resolves same-line collisions.

use super::chunk::SymbolKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemRole {
    Definition(SymbolKind, String),
    Statement,
    Comment,
}

/// One syntax item on 0-based rows `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub start: u32,
    pub end: u32,
    pub role: ItemRole,
    /// Enclosing class name for class-body items.
    pub scope: Option<String>,
}

impl Item {
    pub fn new(start: u32, end: u32, role: ItemRole, scope: Option<String>) -> Self {
        Self { start, end, role, scope }
    }
}

/// A chunk-to-be on 1-based inclusive lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start_line: u32,
    pub end_line: u32,
    pub kind: SymbolKind,
    pub name: String,
    pub scope: Option<String>,
}

pub const MODULE_NAME: &str = "<module>";

pub fn assemble(mut items: Vec<Item>) -> Vec<Segment> {
    items.sort_by_key(|i| (i.start, i.end));

    // Leading comments attach to the definition directly below them.
    let mut attached: Vec<Item> = Vec::with_capacity(items.len());
    for item in items.into_iter().rev() {
        if item.role == ItemRole::Comment {
            if let Some(next) = attached.last_mut() {
                if matches!(next.role, ItemRole::Definition(..)) && next.start == item.end + 1 && next.scope == item.scope {
                    next.start = item.start;
                    continue;
                }
            }
        }
        attached.push(item);
    }
    attached.reverse();

    // Which loose items the last segment may absorb.
    #[derive(PartialEq)]
    enum Absorbs {
        Nothing,
        Module,
        ClassBody(String),
    }
    let mut out: Vec<Segment> = Vec::new();
    let mut absorbs = Absorbs::Nothing;
    for item in attached {
        match item.role {
            ItemRole::Definition(kind, name) => {
                absorbs = if kind == SymbolKind::Class {
                    Absorbs::ClassBody(name.clone())
                } else {
                    Absorbs::Nothing
                };
                let scope = if kind == SymbolKind::Method { item.scope } else { None };
                out.push(Segment {
                    start_line: item.start + 1,
                    end_line: item.end + 1,
                    kind,
                    name,
                    scope,
                });
            }
            ItemRole::Statement | ItemRole::Comment => {
                let wanted = match &item.scope {
                    None => Absorbs::Module,
                    Some(c) => Absorbs::ClassBody(c.clone()),
                };
                if absorbs == wanted {
                    if let Some(last) = out.last_mut() {
                        last.end_line = last.end_line.max(item.end + 1);
                        continue;
                    }
                }
                let (kind, name) = match &item.scope {
                    None => (SymbolKind::ModuleTopLevel, MODULE_NAME.to_string()),
                    Some(c) => (SymbolKind::Class, c.clone()),
                };
                out.push(Segment {
                    start_line: item.start + 1,
                    end_line: item.end + 1,
                    kind,
                    name,
                    scope: None,
                });
                absorbs = wanted;
            }
        }
    }

    // Items sharing a line cannot be separate chunks.
    let mut merged: Vec<Segment> = Vec::with_capacity(out.len());
    for seg in out {
        match merged.last_mut() {
            Some(prev) if seg.start_line <= prev.end_line => prev.end_line = prev.end_line.max(seg.end_line),
            _ => merged.push(seg),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn def(start: u32, end: u32, kind: SymbolKind, name: &str, scope: Option<&str>) -> Item {
        Item::new(start, end, ItemRole::Definition(kind, name.into()), scope.map(str::to_string))
    }

    #[test]
    fn detached_comment_joins_module_run() {
        let items = vec![
            Item::new(0, 0, ItemRole::Statement, None),
            Item::new(2, 2, ItemRole::Comment, None),
            def(4, 5, SymbolKind::Function, "f", None),
        ];
        let segs = assemble(items);
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].start_line, segs[0].end_line), (1, 3));
        assert_eq!((segs[1].start_line, segs[1].end_line), (5, 6));
    }

    #[test]
    fn class_body_after_methods_is_a_class_continuation() {
        let items = vec![
            def(0, 0, SymbolKind::Class, "A", None),
            def(1, 2, SymbolKind::Method, "m", Some("A")),
            Item::new(4, 4, ItemRole::Statement, Some("A".into())),
        ];
        let segs = assemble(items);
        assert_eq!(segs.len(), 3);
        assert_eq!(
            (segs[2].kind, segs[2].name.as_str(), segs[2].start_line),
            (SymbolKind::Class, "A", 5)
        );
    }

    #[test]
    fn same_line_items_merge() {
        let items = vec![
            def(0, 0, SymbolKind::Class, "A", None),
            def(0, 0, SymbolKind::Method, "m", Some("A")),
        ];
        let segs = assemble(items);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].name, "A");
    }
}
