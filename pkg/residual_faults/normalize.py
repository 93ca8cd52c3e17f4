"""
Code normalisation: strips comments and docstrings and anonymises
identifiers and literals so that alpha-equivalent methods compare equal.

Identifiers become var0, var1, ...; numbers become num0, ...; strings and
f-strings become "str0", ...; all numbered in first-occurrence order.
Keywords, builtins, True/False/None and ``...`` are kept.
"""

import ast
import builtins
import logging
import re
import textwrap
import tokenize
from dataclasses import dataclass

from residual_faults.syntax import safe_tokens

logger = logging.getLogger(__name__)

PRESERVED_NAMES = frozenset(dir(builtins))
_NUM_PLACEHOLDER = re.compile(r"^num\d+$")


@dataclass(frozen=True)
class NormalizedSource:
    text: str
    parsed: bool


class _Anonymiser(ast.NodeTransformer):
    def __init__(self):
        self.names: dict[str, str] = {}
        self.numbers: dict[str, str] = {}
        self.strings: dict[str, str] = {}

    def _name(self, name: str | None) -> str | None:
        if name is None or name in PRESERVED_NAMES:
            return name
        if _NUM_PLACEHOLDER.match(name):
            return self._number(name)
        if name not in self.names:
            self.names[name] = f"var{len(self.names)}"
        return self.names[name]

    def _number(self, key: str) -> str:
        if key not in self.numbers:
            self.numbers[key] = f"num{len(self.numbers)}"
        return self.numbers[key]

    def _string(self, key: str) -> str:
        if key not in self.strings:
            self.strings[key] = f"str{len(self.strings)}"
        return self.strings[key]

    def visit_Expr(self, node):
        # docstrings and other bare string statements
        if isinstance(node.value, ast.Constant) and isinstance(node.value.value, str):
            return None
        self.generic_visit(node)
        return node

    def _visit_def(self, node):
        node.name = self._name(node.name)
        self.generic_visit(node)
        return node

    visit_FunctionDef = _visit_def
    visit_AsyncFunctionDef = _visit_def
    visit_ClassDef = _visit_def

    def visit_Name(self, node):
        node.id = self._name(node.id)
        return node

    def visit_arg(self, node):
        node.arg = self._name(node.arg)
        self.generic_visit(node)
        return node

    def visit_Attribute(self, node):
        self.generic_visit(node)
        node.attr = self._name(node.attr)
        return node

    def visit_keyword(self, node):
        node.arg = self._name(node.arg)
        self.generic_visit(node)
        return node

    def visit_alias(self, node):
        node.name = ".".join(self._name(part) for part in node.name.split(".")) if node.name != "*" else "*"
        node.asname = self._name(node.asname)
        return node

    def visit_ImportFrom(self, node):
        if node.module:
            node.module = ".".join(self._name(part) for part in node.module.split("."))
        self.generic_visit(node)
        return node

    def _visit_scoped_names(self, node):
        node.names = [self._name(n) for n in node.names]
        return node

    visit_Global = _visit_scoped_names
    visit_Nonlocal = _visit_scoped_names

    def visit_ExceptHandler(self, node):
        if node.type is not None:
            node.type = self.visit(node.type)
        node.name = self._name(node.name)
        node.body = [r for r in (self.visit(s) for s in node.body) if r is not None]
        return node

    def visit_MatchAs(self, node):
        self.generic_visit(node)
        node.name = self._name(node.name)
        return node

    def visit_MatchStar(self, node):
        node.name = self._name(node.name)
        return node

    def visit_MatchMapping(self, node):
        self.generic_visit(node)
        node.rest = self._name(node.rest)
        return node

    def visit_MatchClass(self, node):
        self.generic_visit(node)
        node.kwd_attrs = [self._name(a) for a in node.kwd_attrs]
        return node

    def visit_JoinedStr(self, node):
        return ast.copy_location(ast.Constant(value=self._string(ast.unparse(node))), node)

    def visit_Constant(self, node):
        value = node.value
        if value is None or value is Ellipsis or isinstance(value, bool):
            return node
        if isinstance(value, (int, float, complex)):
            return ast.copy_location(ast.Name(id=self._number(repr(value)), ctx=ast.Load()), node)
        if isinstance(value, (str, bytes)):
            return ast.copy_location(ast.Constant(value=self._string(repr(value))), node)
        return node


def strip_noise(source_text: str) -> str:
    """Dedent and drop leading/trailing blank lines left by span extraction."""
    text = source_text.replace("\r\n", "\n").expandtabs(8)
    return textwrap.dedent(text).strip("\n")


def strip_comments(source_text: str) -> str:
    lines = source_text.splitlines()
    tokens, _ = safe_tokens(source_text)
    for tok in reversed(tokens):
        if tok.type == tokenize.COMMENT:
            row, col = tok.start
            lines[row - 1] = lines[row - 1][:col].rstrip()
    return "\n".join(line for line in lines if line.strip())


def normalize_code(source_text: str) -> NormalizedSource:
    text = strip_noise(source_text)
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError):
        logger.debug("normalize_code: parse failed, stripping comments only")
        return NormalizedSource(strip_comments(text), parsed=False)
    tree = _Anonymiser().visit(tree)
    for node in ast.walk(tree):
        if not isinstance(node, ast.Module) and isinstance(getattr(node, "body", None), list) and not node.body:
            node.body = [ast.Pass()]
    ast.fix_missing_locations(tree)
    return NormalizedSource(ast.unparse(tree), parsed=True)
