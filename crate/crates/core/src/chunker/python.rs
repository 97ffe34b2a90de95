//! Python definition segmentation on top of tree-sitter.

use tree_sitter::{Node, Parser};

use super::chunk::SymbolKind;
use super::segment::{Item, ItemRole, Segment};
use super::LanguageChunker;

#[derive(Debug, Default, Clone, Copy)]
pub struct PythonChunker;

impl LanguageChunker for PythonChunker {
    fn language(&self) -> &'static str {
        "python"
    }

    fn segments(&self, source: &str) -> Result<Vec<Segment>, String> {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .map_err(|e| e.to_string())?;
        let tree = parser.parse(source, None).ok_or_else(|| "parser returned no tree".to_string())?;
        let root = tree.root_node();
        if root.has_error() {
            let at = first_error(root).map(|n| n.start_position().row + 1).unwrap_or(1);
            return Err(format!("syntax error near line {at}"));
        }
        let mut items = Vec::new();
        let mut cursor = root.walk();
        for child in root.named_children(&mut cursor) {
            top_level_item(child, source, &mut items);
        }
        Ok(super::segment::assemble(items))
    }
}

fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children.into_iter().filter(|c| c.has_error()).find_map(first_error)
}

fn rows(node: Node<'_>) -> (u32, u32) {
    let start = node.start_position().row as u32;
    let end_pos = node.end_position();
    let mut end = end_pos.row as u32;
    if end_pos.column == 0 && end > start {
        end -= 1;
    }
    (start, end)
}

fn name_of(node: Node<'_>, source: &str) -> String {
    node.child_by_field_name("name")
        .and_then(|n| n.utf8_text(source.as_bytes()).ok())
        .unwrap_or("<anonymous>")
        .to_string()
}

/// The function or class a (possibly decorated) definition node defines.
fn definition(node: Node<'_>) -> Option<Node<'_>> {
    match node.kind() {
        "function_definition" | "class_definition" => Some(node),
        "decorated_definition" => node.child_by_field_name("definition"),
        _ => None,
    }
}

fn top_level_item(node: Node<'_>, source: &str, items: &mut Vec<Item>) {
    let (start, end) = rows(node);
    if node.kind() == "comment" {
        items.push(Item::new(start, end, ItemRole::Comment, None));
        return;
    }
    match definition(node) {
        Some(def) if def.kind() == "function_definition" => {
            items.push(Item::new(
                start,
                end,
                ItemRole::Definition(SymbolKind::Function, name_of(def, source)),
                None,
            ));
        }
        Some(def) => class_items(node, def, source, items),
        None => items.push(Item::new(start, end, ItemRole::Statement, None)),
    }
}

fn class_items(outer: Node<'_>, class: Node<'_>, source: &str, items: &mut Vec<Item>) {
    let name = name_of(class, source);
    let (start, end) = rows(outer);
    let Some(body) = class.child_by_field_name("body") else {
        items.push(Item::new(start, end, ItemRole::Definition(SymbolKind::Class, name), None));
        return;
    };
    let body_start = body.start_position().row as u32;
    let header_end = if body_start > start { body_start - 1 } else { start };
    items.push(Item::new(
        start,
        header_end,
        ItemRole::Definition(SymbolKind::Class, name.clone()),
        None,
    ));

    let mut cursor = body.walk();
    // Comments between the header and the body belong to the class node.
    let mut class_cursor = class.walk();
    let pre_body_comments: Vec<_> = class
        .named_children(&mut class_cursor)
        .filter(|c| c.kind() == "comment" && (c.start_position().row as u32) > header_end)
        .collect();
    for c in pre_body_comments {
        let (s, e) = rows(c);
        items.push(Item::new(s, e, ItemRole::Comment, Some(name.clone())));
    }
    for child in body.named_children(&mut cursor) {
        let (s, e) = rows(child);
        let role = if child.kind() == "comment" {
            ItemRole::Comment
        } else {
            match definition(child) {
                Some(def) if def.kind() == "function_definition" => ItemRole::Definition(SymbolKind::Method, name_of(def, source)),
                _ => ItemRole::Statement,
            }
        };
        items.push(Item::new(s, e, role, Some(name.clone())));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(src: &str) -> Vec<(u32, u32, SymbolKind, String, Option<String>)> {
        PythonChunker
            .segments(src)
            .unwrap()
            .into_iter()
            .map(|s| (s.start_line, s.end_line, s.kind, s.name, s.scope))
            .collect()
    }

    #[test]
    fn functions_with_leading_comments_and_decorators() {
        let src = "import os\n\n# helper\n@cache\ndef f():\n    return 1\n\n\ndef g():\n    pass\n";
        assert_eq!(
            seg(src),
            vec![
                (1, 1, SymbolKind::ModuleTopLevel, "<module>".into(), None),
                (3, 6, SymbolKind::Function, "f".into(), None),
                (9, 10, SymbolKind::Function, "g".into(), None),
            ]
        );
    }

    #[test]
    fn class_decomposes_into_header_and_methods() {
        let src =
            "class A:\n    \"\"\"Doc.\"\"\"\n    x = 1\n\n    def m(self):\n        pass\n\n    # second\n    def n(self):\n        pass\n";
        assert_eq!(
            seg(src),
            vec![
                (1, 3, SymbolKind::Class, "A".into(), None),
                (5, 6, SymbolKind::Method, "m".into(), Some("A".into())),
                (8, 10, SymbolKind::Method, "n".into(), Some("A".into())),
            ]
        );
    }

    #[test]
    fn one_line_class_stays_whole() {
        assert_eq!(seg("class A: pass\n"), vec![(1, 1, SymbolKind::Class, "A".into(), None)]);
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(PythonChunker.segments("def f(:\n  pass\n").is_err());
    }

    #[test]
    fn empty_source_has_no_segments() {
        assert!(seg("").is_empty());
        assert!(seg("\n\n").is_empty());
    }
}
