"""
Source parsing: syntax units, line kinds and lexical tokens for Python files.

A file parses into a tree of SyntaxUnit objects (File > Class/Method).
Files with syntax errors are parsed up to the last line that still parses
and flagged; a file where nothing parses raises UnparseableSourceError.
"""

import ast
import enum
import io
import logging
import re
import tokenize
from dataclasses import dataclass, field
from typing import Iterator

from residual_faults.errors import UnparseableSourceError

logger = logging.getLogger(__name__)

CODE = "code"
COMMENT = "comment"
BLANK = "blank"

_SKIP_TOKENS = {
    tokenize.NL, tokenize.NEWLINE, tokenize.INDENT, tokenize.DEDENT,
    tokenize.ENDMARKER, tokenize.ENCODING,
}
FSTRING_START = getattr(tokenize, "FSTRING_START", None)
FSTRING_END = getattr(tokenize, "FSTRING_END", None)

_FALLBACK_TOKEN_RE = re.compile(
    r"""[A-Za-z_]\w*|\d[\w.]*|'(?:\\.|[^'\\\n])*'|"(?:\\.|[^"\\\n])*"|\*\*=?|//=?|->|:=|[<>=!]=|<<=?|>>=?|[-+*/%&|^@]=?|[()\[\]{}.,:;~<>=]"""
)


class UnitKind(str, enum.Enum):
    FILE = "File"
    CLASS = "Class"
    METHOD = "Method"


@dataclass(frozen=True)
class Token:
    type: int
    string: str
    start: tuple[int, int]
    end: tuple[int, int]


def safe_tokens(text: str) -> tuple[list[Token], bool]:
    """Tokenize text; on a lexical error keep the tokens read so far.

    Returns the tokens and whether tokenization reached the end.
    """
    tokens: list[Token] = []
    try:
        for tok in tokenize.generate_tokens(io.StringIO(text).readline):
            tokens.append(Token(tok.type, tok.string, tok.start, tok.end))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        return tokens, False
    return tokens, True


def fallback_tokens(line: str, row: int) -> list[Token]:
    """Regex tokenization of one line, used past a tokenizer failure."""
    code = line.split("#", 1)[0]
    out = []
    for m in _FALLBACK_TOKEN_RE.finditer(code):
        s = m.group(0)
        if s[0].isalpha() or s[0] == "_":
            kind = tokenize.NAME
        elif s[0].isdigit():
            kind = tokenize.NUMBER
        elif s[0] in "'\"":
            kind = tokenize.STRING
        else:
            kind = tokenize.OP
        out.append(Token(kind, s, (row, m.start()), (row, m.end())))
    return out


def docstring_starts(tree: ast.AST | None) -> set[tuple[int, int]]:
    """(line, column) of every module, class and function docstring."""
    starts: set[tuple[int, int]] = set()
    if tree is None:
        return starts
    for node in ast.walk(tree):
        if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            body = node.body
            if (
                body
                and isinstance(body[0], ast.Expr)
                and isinstance(body[0].value, ast.Constant)
                and isinstance(body[0].value.value, str)
            ):
                starts.add((body[0].value.lineno, body[0].value.col_offset))
    return starts


def classify_lines(lines: list[str], tokens: list[Token], complete: bool, doc_starts: set[tuple[int, int]]) -> list[str]:
    """One kind per physical line: blank, comment-only (incl. docstrings) or code."""
    code_rows: set[int] = set()
    comment_rows: set[int] = set()
    covered = 0
    fstring_depth = 0
    for tok in tokens:
        covered = max(covered, tok.end[0])
        if tok.type in _SKIP_TOKENS:
            continue
        if tok.type == tokenize.COMMENT:
            comment_rows.add(tok.start[0])
            continue
        if FSTRING_START is not None and tok.type in (FSTRING_START, FSTRING_END):
            fstring_depth += 1 if tok.type == FSTRING_START else -1
        rows = range(tok.start[0], tok.end[0] + 1)
        if tok.type == tokenize.STRING and tok.start in doc_starts and fstring_depth == 0:
            comment_rows.update(rows)
        else:
            code_rows.update(rows)
    kinds = []
    for row, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            kinds.append(BLANK)
        elif row in code_rows:
            kinds.append(CODE)
        elif row in comment_rows:
            kinds.append(COMMENT)
        elif complete and row <= covered:
            # continuation backslash or similar: part of code
            kinds.append(CODE)
        else:
            kinds.append(COMMENT if stripped.startswith("#") else CODE)
    return kinds


class LineKinds:
    """Line classification helper exposed for tests and file metrics."""

    @staticmethod
    def classify(source: str) -> list[str]:
        lines = source.splitlines()
        tokens, complete = safe_tokens(source)
        try:
            tree = ast.parse(source)
        except (SyntaxError, ValueError):
            tree = None
        return classify_lines(lines, tokens, complete, docstring_starts(tree))


@dataclass
class SourceFile:
    """Everything derived once per file and shared by its units."""

    text: str
    lines: list[str]
    tree: ast.Module
    error: bool
    line_kinds: list[str]
    tokens: list[Token]
    doc_starts: set[tuple[int, int]]

    def tokens_in(self, start: int, end: int) -> list[Token]:
        return [t for t in self.tokens if start <= t.start[0] <= end]


@dataclass
class SyntaxUnit:
    kind: UnitKind
    qualified_name: str
    source_span: tuple[int, int]
    body_text: str
    child_units: list["SyntaxUnit"] = field(default_factory=list)
    node: ast.AST | None = field(default=None, compare=False, repr=False)
    source: SourceFile | None = field(default=None, compare=False, repr=False)
    parent_class: "SyntaxUnit | None" = field(default=None, compare=False, repr=False)

    @property
    def name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1].split("~", 1)[0]

    @property
    def error(self) -> bool:
        return bool(self.source and self.source.error)

    @property
    def line_kinds(self) -> list[str]:
        start, end = self.source_span
        if self.source is None or end < start:
            return []
        return self.source.line_kinds[start - 1:end]

    def walk(self) -> Iterator["SyntaxUnit"]:
        """Depth-first over this unit and every descendant."""
        yield self
        for child in self.child_units:
            yield from child.walk()

    def units(self, kind: UnitKind) -> list["SyntaxUnit"]:
        return [u for u in self.walk() if u.kind == kind]

    def find(self, qualified_name: str, kind: UnitKind = UnitKind.METHOD) -> "SyntaxUnit | None":
        for unit in self.walk():
            if unit.kind == kind and unit.qualified_name == qualified_name:
                return unit
        return None


def _parse_prefix(text: str) -> tuple[ast.Module, bool]:
    try:
        return ast.parse(text), False
    except (SyntaxError, ValueError) as exc:
        lines = text.splitlines()
        lineno = getattr(exc, "lineno", None) or len(lines)
        cut = min(max(lineno - 1, 0), len(lines))
        while cut > 0:
            try:
                return ast.parse("\n".join(lines[:cut]) + "\n"), True
            except (SyntaxError, ValueError):
                cut -= 1
        if text.strip():
            raise UnparseableSourceError(f"source does not parse: {exc}") from exc
        return ast.Module(body=[], type_ignores=[]), True


def unit_span(node: ast.AST) -> tuple[int, int]:
    start = node.lineno
    for dec in getattr(node, "decorator_list", []) or []:
        start = min(start, dec.lineno)
    return start, node.end_lineno or node.lineno


def _collect(parent: SyntaxUnit, stmts, prefix: str, source: SourceFile, seen: dict, enclosing_class):
    for stmt in stmts:
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            is_class = isinstance(stmt, ast.ClassDef)
            kind = UnitKind.CLASS if is_class else UnitKind.METHOD
            qname = f"{prefix}{stmt.name}"
            count = seen.get((kind, qname), 0) + 1
            seen[(kind, qname)] = count
            if count > 1:
                qname = f"{qname}~{count}"
            start, end = unit_span(stmt)
            unit = SyntaxUnit(
                kind=kind,
                qualified_name=qname,
                source_span=(start, end),
                body_text="\n".join(source.lines[start - 1:end]),
                node=stmt,
                source=source,
                parent_class=enclosing_class,
            )
            parent.child_units.append(unit)
            _collect(unit, stmt.body, f"{qname}.", source, seen, unit if is_class else None)
        else:
            for name in ("body", "orelse", "finalbody", "handlers", "cases"):
                children = getattr(stmt, name, None)
                if isinstance(children, list) and children:
                    _collect(parent, children, prefix, source, seen, enclosing_class)


def parse_source(source_text: str) -> SyntaxUnit:
    """Parse a file into its File unit; partial trees carry ``error=True``."""
    text = source_text.replace("\r\n", "\n").replace("\r", "\n")
    tree, error = _parse_prefix(text)
    lines = text.splitlines()
    tokens, complete = safe_tokens(text)
    if not complete:
        last = tokens[-1].end[0] if tokens else 0
        for row in range(last + 1, len(lines) + 1):
            tokens.extend(fallback_tokens(lines[row - 1], row))
    doc_starts = docstring_starts(tree)
    source = SourceFile(
        text=text,
        lines=lines,
        tree=tree,
        error=error,
        line_kinds=classify_lines(lines, tokens, complete, doc_starts),
        tokens=tokens,
        doc_starts=doc_starts,
    )
    if error:
        logger.warning("Partial parse: %d of %d lines usable", (tree.body[-1].end_lineno if tree.body else 0), len(lines))
    root = SyntaxUnit(
        kind=UnitKind.FILE,
        qualified_name="<module>",
        source_span=(1, len(lines)),
        body_text=text,
        node=tree,
        source=source,
    )
    _collect(root, tree.body, "", source, {}, None)
    return root
