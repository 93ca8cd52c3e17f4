"""
Product and Python-specific metrics at method, class and file level.

Counting conventions:

* Operators are keywords (except True/False/None), operators and
  delimiters; a bracket pair counts once, on the opening bracket.
  Operands are identifiers, literals and whole f-strings. Docstrings are
  neither.
* Comment lines are comment-only lines and docstring lines; a line with
  both code and a comment is a code line.
* Ratios with a zero denominator are 0.
* Nested function and class bodies belong to their own unit, not to the
  enclosing method's CC, MND, NP, NOUT or exit counts.
"""

import ast
import keyword
import logging
import math
import tokenize
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import PurePosixPath
from typing import Iterable

from residual_faults.catalog import PRESENT_CLASS, PRESENT_FILE, PRESENT_METHOD, PRODUCT_METRICS
from residual_faults.errors import UnparseableSourceError
from residual_faults.syntax import (
    BLANK,
    CODE,
    COMMENT,
    FSTRING_END,
    FSTRING_START,
    LineKinds,
    SyntaxUnit,
    Token,
    UnitKind,
    docstring_starts,
    parse_source,
    safe_tokens,
)

logger = logging.getLogger(__name__)

NP_CAP = 10**6
EXEMPT_NUMBERS = {-1, 0, 1, 2}
_FUNCS = (ast.FunctionDef, ast.AsyncFunctionDef)
_SCOPES = (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)
_CLOSING = {")", "]", "}"}
_OPERAND_KEYWORDS = {"True", "False", "None"}
_NOISE_TOKENS = {
    tokenize.NL, tokenize.NEWLINE, tokenize.INDENT, tokenize.DEDENT,
    tokenize.ENDMARKER, tokenize.ENCODING, tokenize.COMMENT,
}

__all__ = [
    "HalsteadCounts", "LineKinds", "ProjectIndex", "changed_methods", "class_metrics",
    "coupling_metrics", "file_metrics", "halstead_counts", "method_metrics",
    "product_metrics_row", "python_specific",
]


def _ratio(num: float, den: float) -> float:
    return float(num) / den if den else 0.0


def _walk_own(node: ast.AST):
    """Walk node's subtree without entering nested def/class bodies."""
    stack = list(ast.iter_child_nodes(node))
    while stack:
        child = stack.pop()
        yield child
        if isinstance(child, _SCOPES):
            continue
        stack.extend(ast.iter_child_nodes(child))


# ---------------------------------------------------------------------------
# Halstead


@dataclass(frozen=True)
class HalsteadCounts:
    distinct_operators: int
    distinct_operands: int
    total_operators: int
    total_operands: int

    @property
    def vocabulary(self) -> int:
        return self.distinct_operators + self.distinct_operands

    @property
    def length(self) -> int:
        return self.total_operators + self.total_operands

    @property
    def volume(self) -> float:
        hv = self.vocabulary
        return self.length * math.log2(hv) if hv > 1 else 0.0

    @property
    def difficulty(self) -> float:
        if not self.distinct_operands:
            return 0.0
        return (self.distinct_operators / 2.0) * (self.total_operands / self.distinct_operands)

    @property
    def effort(self) -> float:
        return self.difficulty * self.volume


def _slice_text(lines: list[str], start: tuple[int, int], end: tuple[int, int]) -> str:
    (r0, c0), (r1, c1) = start, end
    if r0 == r1:
        return lines[r0 - 1][c0:c1]
    parts = [lines[r0 - 1][c0:]] + lines[r0:r1 - 1] + [lines[r1 - 1][:c1]]
    return "\n".join(parts)


def _halstead_from_tokens(tokens: list[Token], doc_starts: set, lines: list[str]) -> HalsteadCounts:
    operators: list[str] = []
    operands: list[str] = []
    depth = 0
    fstart = None
    for tok in tokens:
        if FSTRING_START is not None and tok.type == FSTRING_START:
            if depth == 0:
                fstart = tok.start
            depth += 1
            continue
        if FSTRING_END is not None and tok.type == FSTRING_END:
            depth -= 1
            if depth == 0 and fstart is not None:
                operands.append(_slice_text(lines, fstart, tok.end))
                fstart = None
            continue
        if depth > 0 or tok.type in _NOISE_TOKENS:
            continue
        if tok.type == tokenize.STRING:
            if tok.start not in doc_starts:
                operands.append(tok.string)
        elif tok.type == tokenize.NUMBER:
            operands.append(tok.string)
        elif tok.type == tokenize.NAME:
            if keyword.iskeyword(tok.string) and tok.string not in _OPERAND_KEYWORDS:
                operators.append(tok.string)
            else:
                operands.append(tok.string)
        elif tok.type == tokenize.OP:
            if tok.string not in _CLOSING:
                operators.append(tok.string)
    return HalsteadCounts(
        distinct_operators=len(set(operators)),
        distinct_operands=len(set(operands)),
        total_operators=len(operators),
        total_operands=len(operands),
    )


def halstead_counts(text: str) -> HalsteadCounts:
    """Halstead operator/operand counts of a code fragment."""
    tokens, _ = safe_tokens(text)
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError):
        tree = None
    return _halstead_from_tokens(tokens, docstring_starts(tree), text.splitlines())


def _unit_halstead(unit: SyntaxUnit) -> HalsteadCounts:
    start, end = unit.source_span
    src = unit.source
    return _halstead_from_tokens(src.tokens_in(start, end), src.doc_starts, src.lines)


# ---------------------------------------------------------------------------
# Control flow


def cyclomatic_complexity(node: ast.AST) -> int:
    cc = 1
    for child in _walk_own(node):
        if isinstance(child, (ast.If, ast.For, ast.AsyncFor, ast.While, ast.ExceptHandler, ast.IfExp)):
            cc += 1
        elif isinstance(child, ast.BoolOp):
            cc += len(child.values) - 1
        elif isinstance(child, ast.comprehension):
            cc += len(child.ifs)
        elif isinstance(child, ast.match_case):
            if not _is_wildcard(child):
                cc += 1
            if child.guard is not None:
                cc += 1
    return cc


def _is_wildcard(case: ast.match_case) -> bool:
    pattern = case.pattern
    return isinstance(pattern, ast.MatchAs) and pattern.pattern is None and case.guard is None


def _is_elif(node: ast.If) -> bool:
    return (
        len(node.orelse) == 1
        and isinstance(node.orelse[0], ast.If)
        and node.orelse[0].col_offset == node.col_offset
    )


def _child_blocks(stmt: ast.stmt) -> list[list]:
    """Statement lists nested in a compound statement."""
    blocks = []
    for name in ("body", "orelse", "finalbody"):
        block = getattr(stmt, name, None)
        if isinstance(block, list) and block and isinstance(block[0], ast.stmt):
            blocks.append(block)
    for handler in getattr(stmt, "handlers", None) or []:
        blocks.append(handler.body)
    for case in getattr(stmt, "cases", None) or []:
        blocks.append(case.body)
    return blocks


def _is_compound(stmt: ast.stmt) -> bool:
    return bool(_child_blocks(stmt)) and not isinstance(stmt, _SCOPES)


def max_nesting(stmts: list, level: int = 0) -> int:
    """Deepest compound-statement nesting below a body at ``level``."""
    deepest = level
    for stmt in stmts:
        if isinstance(stmt, _SCOPES) or not _is_compound(stmt):
            continue
        if isinstance(stmt, ast.If) and _is_elif(stmt):
            deepest = max(deepest, max_nesting(stmt.body, level + 1), max_nesting(stmt.orelse, level))
            continue
        for block in _child_blocks(stmt):
            deepest = max(deepest, max_nesting(block, level + 1))
    return deepest


def block_depth(stmts: list, level: int) -> int:
    """Maximum indentation level of any statement, nested definitions included."""
    deepest = level if stmts else level - 1
    for stmt in stmts:
        if isinstance(stmt, ast.If) and _is_elif(stmt):
            deepest = max(deepest, block_depth(stmt.body, level + 1), block_depth(stmt.orelse, level))
            continue
        for block in _child_blocks(stmt):
            deepest = max(deepest, block_depth(block, level + 1))
    return deepest


def _expr_paths(nodes) -> int:
    paths = 1
    for node in nodes:
        if node is None:
            continue
        for child in [node, *_walk_own(node)]:
            if isinstance(child, ast.IfExp):
                paths += 1
            elif isinstance(child, ast.comprehension):
                paths += len(child.ifs)
    return paths


def _mul(a: int, b: int) -> int:
    return min(a * b, NP_CAP)


def _seq_paths(stmts: list) -> int:
    paths = 1
    for stmt in stmts:
        paths = _mul(paths, _stmt_paths(stmt))
    return paths


def _stmt_paths(stmt: ast.stmt) -> int:
    if isinstance(stmt, _SCOPES):
        return 1
    if isinstance(stmt, ast.If):
        branch = min(_seq_paths(stmt.body) + _seq_paths(stmt.orelse), NP_CAP)
        return _mul(_expr_paths([stmt.test]), branch)
    if isinstance(stmt, (ast.For, ast.AsyncFor, ast.While)):
        header = _expr_paths([stmt.test] if isinstance(stmt, ast.While) else [stmt.iter])
        loop = _mul(min(_seq_paths(stmt.body) + 1, NP_CAP), _seq_paths(stmt.orelse))
        return _mul(header, loop)
    if isinstance(stmt, (ast.With, ast.AsyncWith)):
        header = _expr_paths([item.context_expr for item in stmt.items])
        return _mul(header, _seq_paths(stmt.body))
    if isinstance(stmt, (ast.Try, getattr(ast, "TryStar", ast.Try))):
        inner = _mul(_seq_paths(stmt.body), _seq_paths(stmt.orelse))
        for handler in stmt.handlers:
            inner = min(inner + _seq_paths(handler.body), NP_CAP)
        return _mul(inner, _seq_paths(stmt.finalbody))
    if isinstance(stmt, ast.Match):
        total = 0 if any(_is_wildcard(c) for c in stmt.cases) else 1
        for case in stmt.cases:
            total = min(total + _seq_paths(case.body), NP_CAP)
        return _mul(_expr_paths([stmt.subject]), max(total, 1))
    return _expr_paths([stmt])


def number_of_paths(node: ast.AST) -> int:
    """Acyclic execution paths through a function body, capped at NP_CAP."""
    return _seq_paths(node.body)


# ---------------------------------------------------------------------------
# Lines and statements


def _is_declaration(stmt: ast.stmt) -> bool:
    if isinstance(stmt, (*_SCOPES, ast.Import, ast.ImportFrom, ast.Global, ast.Nonlocal)):
        return True
    return isinstance(stmt, ast.AnnAssign) and stmt.value is None


def _declaration_rows(node: ast.AST, include_self: bool) -> set[int]:
    """Physical lines occupied by declarations: def/class headers, imports, bare annotations."""
    rows: set[int] = set()
    candidates = [node] if include_self and isinstance(node, ast.stmt) else []
    candidates.extend(n for n in ast.walk(node) if isinstance(n, ast.stmt) and n is not node)
    for stmt in candidates:
        if not _is_declaration(stmt):
            continue
        if isinstance(stmt, _SCOPES):
            start = min([stmt.lineno] + [d.lineno for d in stmt.decorator_list])
            body_start = stmt.body[0].lineno if stmt.body else stmt.end_lineno
            header_end = stmt.lineno if body_start <= stmt.lineno else body_start - 1
            rows.update(range(start, header_end + 1))
        else:
            rows.update(range(stmt.lineno, (stmt.end_lineno or stmt.lineno) + 1))
    return rows


@dataclass(frozen=True)
class LineCounts:
    total: int
    code: int
    blank: int
    comment: int
    declaration: int
    comment_before_code: int

    @property
    def executable(self) -> int:
        return self.code - self.declaration


def _line_counts(kinds: list[str], first_row: int, decl_rows: set[int]) -> LineCounts:
    code_rows = {first_row + i for i, k in enumerate(kinds) if k == CODE}
    before_code = 0
    for i, kind in enumerate(kinds):
        if kind != COMMENT:
            continue
        j = i + 1
        while j < len(kinds) and kinds[j] == BLANK:
            j += 1
        if j < len(kinds) and kinds[j] == CODE:
            before_code += 1
    return LineCounts(
        total=len(kinds),
        code=len(code_rows),
        blank=sum(1 for k in kinds if k == BLANK),
        comment=sum(1 for k in kinds if k == COMMENT),
        declaration=len(decl_rows & code_rows),
        comment_before_code=before_code,
    )


def _statement_counts(node: ast.AST, include_self: bool) -> tuple[int, int]:
    stmts = [n for n in ast.walk(node) if isinstance(n, ast.stmt) and (include_self or n is not node)]
    return len(stmts), sum(1 for s in stmts if _is_declaration(s))


# ---------------------------------------------------------------------------
# Project index (hierarchy and call graph)


def _called_names(node: ast.AST) -> set[str]:
    names = set()
    for child in _walk_own(node):
        if isinstance(child, ast.Call):
            func = child.func
            if isinstance(func, ast.Name):
                names.add(func.id)
            elif isinstance(func, ast.Attribute):
                names.add(func.attr)
    return names


def _base_names(node: ast.ClassDef) -> list[str]:
    names = []
    for base in node.bases:
        try:
            text = ast.unparse(base)
        except (AttributeError, ValueError):
            continue
        name = text.split("[", 1)[0].rsplit(".", 1)[-1]
        if name and name != "object":
            names.append(name)
    return names


@dataclass
class ClassInfo:
    path: str
    qualified_name: str
    name: str
    bases: list[str]


@dataclass
class ProjectIndex:
    """Class hierarchy and name-level call map over one snapshot of a project."""

    classes: dict[tuple[str, str], ClassInfo] = field(default_factory=dict)
    functions: dict[str, set[tuple[str, str]]] = field(default_factory=lambda: defaultdict(set))
    calls: dict[tuple[str, str], set[str]] = field(default_factory=dict)
    files: dict[str, SyntaxUnit] = field(default_factory=dict)
    skipped_files: int = 0

    @classmethod
    def build(cls, sources: dict[str, str]) -> "ProjectIndex":
        index = cls()
        for path in sorted(sources):
            try:
                root = parse_source(sources[path])
            except UnparseableSourceError as exc:
                index.skipped_files += 1
                logger.warning("Skipping %s: %s", path, exc)
                continue
            index.add(path, root)
        return index

    def add(self, path: str, root: SyntaxUnit) -> None:
        self.files[path] = root
        for unit in root.walk():
            key = (path, unit.qualified_name)
            if unit.kind == UnitKind.CLASS:
                self.classes[key] = ClassInfo(path, unit.qualified_name, unit.name, _base_names(unit.node))
            elif unit.kind == UnitKind.METHOD:
                self.functions[unit.name].add(key)
                self.calls[key] = _called_names(unit.node)

    def resolve_class(self, name: str, from_path: str) -> tuple[str, str] | None:
        matches = sorted(k for k, info in self.classes.items() if info.name == name)
        if not matches:
            return None
        same_file = [k for k in matches if k[0] == from_path]
        return (same_file or matches)[0]

    def depth(self, key: tuple[str, str], _visiting: frozenset = frozenset()) -> int:
        info = self.classes.get(key)
        if info is None or key in _visiting:
            return 1
        best = 0
        for base in info.bases:
            target = self.resolve_class(base, info.path)
            if target is not None:
                best = max(best, self.depth(target, _visiting | {key}))
        return 1 + best

    def subclasses(self, key: tuple[str, str]) -> int:
        count = 0
        for other_key, info in self.classes.items():
            if other_key == key:
                continue
            if any(self.resolve_class(b, info.path) == key for b in info.bases):
                count += 1
        return count


# ---------------------------------------------------------------------------
# Metric slices


def method_metrics(unit: SyntaxUnit) -> dict[str, float]:
    """Method slice without the coupling metrics (FI, FO, CR)."""
    if unit.kind != UnitKind.METHOD:
        raise ValueError(f"method_metrics expects a Method unit, got {unit.kind.value}")
    node = unit.node
    cc = cyclomatic_complexity(node)
    h = _unit_halstead(unit)
    start, _ = unit.source_span
    lines = _line_counts(unit.line_kinds, start, _declaration_rows(node, include_self=True))
    stmt, dstmt = _statement_counts(node, include_self=True)

    args = node.args
    params = [*args.posonlyargs, *args.args]
    nin = len(params) + len(args.kwonlyargs) + (args.vararg is not None) + (args.kwarg is not None)
    if params and params[0].arg in ("self", "cls"):
        nin -= 1

    returns = [n for n in _walk_own(node) if isinstance(n, ast.Return)]
    raises = [n for n in _walk_own(node) if isinstance(n, ast.Raise)]
    outputs = {ast.unparse(r.value) if r.value is not None else "None" for r in returns}
    ne = len(returns) + len(raises)
    nee = ne - 1 if node.body and isinstance(node.body[-1], (ast.Return, ast.Raise)) else ne

    hvol = h.volume
    loc = lines.total
    hmi = 171.0 - 5.2 * (math.log(hvol) if hvol > 0 else 0.0) - 0.23 * cc - 16.2 * (math.log(loc) if loc > 0 else 0.0)

    return {
        "CC": cc,
        "MND": max_nesting(node.body),
        "NP": number_of_paths(node),
        "HD": h.difficulty,
        "HL": h.length,
        "HV": h.vocabulary,
        "HVOL": hvol,
        "HEFF": h.effort,
        "HMI": min(max(hmi, 0.0), 171.0),
        "HDOP": h.distinct_operators,
        "HDND": h.distinct_operands,
        "HTOP": h.total_operators,
        "HTOA": h.total_operands,
        "LOC": loc,
        "BLOC": lines.blank,
        "DLOC": lines.declaration,
        "ELOC": lines.executable,
        "STMT": stmt,
        "DSTMT": dstmt,
        "ESTMT": stmt - dstmt,
        "NIN": nin,
        "NOUT": len(outputs),
        "NE": ne,
        "NEE": nee,
        "COMLOC": lines.comment,
        "CCR": _ratio(lines.comment, lines.code),
        "CLWB": lines.comment_before_code,
        "CCR-B": _ratio(lines.comment_before_code, lines.code),
    }


def _instance_variables(node: ast.ClassDef) -> int:
    names = set()
    for stmt in node.body:
        if isinstance(stmt, _FUNCS) and stmt.name == "__init__":
            for child in ast.walk(stmt):
                targets = []
                if isinstance(child, ast.Assign):
                    targets = child.targets
                elif isinstance(child, (ast.AnnAssign, ast.AugAssign)):
                    targets = [child.target]
                for target in targets:
                    for t in ast.walk(target):
                        if (
                            isinstance(t, ast.Attribute)
                            and isinstance(t.value, ast.Name)
                            and t.value.id == "self"
                        ):
                            names.add(t.attr)
        elif isinstance(stmt, ast.Assign) and not isinstance(stmt.value, ast.Lambda):
            for target in stmt.targets:
                for t in ast.walk(target):
                    if isinstance(t, ast.Name):
                        names.add(t.id)
        elif isinstance(stmt, ast.AnnAssign) and isinstance(stmt.target, ast.Name):
            if not isinstance(stmt.value, ast.Lambda):
                names.add(stmt.target.id)
    return len(names)


def _class_methods(node: ast.ClassDef) -> int:
    """Defs in the class body and nested class bodies, not functions inside methods."""
    count = 0
    stack = list(node.body)
    while stack:
        stmt = stack.pop()
        if isinstance(stmt, _FUNCS):
            count += 1
        elif isinstance(stmt, ast.ClassDef):
            stack.extend(stmt.body)
        else:
            for block in _child_blocks(stmt):
                stack.extend(block)
    return count


def class_metrics(unit: SyntaxUnit, project_index: ProjectIndex | None = None, path: str = "") -> dict[str, float]:
    if unit.kind != UnitKind.CLASS:
        raise ValueError(f"class_metrics expects a Class unit, got {unit.kind.value}")
    node = unit.node
    start, _ = unit.source_span
    lines = _line_counts(unit.line_kinds, start, _declaration_rows(node, include_self=True))
    key = (path, unit.qualified_name)
    if project_index is not None and key in project_index.classes:
        dit = project_index.depth(key)
        dcs = project_index.subclasses(key)
    else:
        dit, dcs = 1, 0
    return {
        "CLLOC": lines.total,
        "CCODE": lines.code,
        "CDLOC": lines.declaration,
        "CELOC": lines.executable,
        "NOM": _class_methods(node),
        "NOM-A": sum(1 for n in node.body if isinstance(n, _FUNCS)),
        "NIV": _instance_variables(node),
        "CCOM": lines.comment,
        "CCR-C": _ratio(lines.comment, lines.code),
        "DIT": dit,
        "BCs": len(_base_names(node)),
        "DCs": dcs,
    }


def file_metrics(root: SyntaxUnit) -> dict[str, float]:
    if root.kind != UnitKind.FILE:
        raise ValueError(f"file_metrics expects a File unit, got {root.kind.value}")
    methods = root.units(UnitKind.METHOD)
    kinds = root.source.line_kinds if root.source else []
    lines = _line_counts(kinds, 1, set())
    stmt, dstmt = _statement_counts(root.node, include_self=False)
    mnd = max_nesting(root.node.body)
    for m in methods:
        mnd = max(mnd, max_nesting(m.node.body))
    np_total = sum(number_of_paths(m.node) for m in methods)
    return {
        "F-CC": sum(cyclomatic_complexity(m.node) for m in methods),
        "F-MND": mnd,
        "F-NPLOG": math.log10(1 + np_total),
        "F-TLOC": lines.total,
        "F-CLOC": lines.code,
        "F-BLOC": lines.blank,
        "F-STMT": stmt,
        "F-DSTMT": dstmt,
        "F-ESTMT": stmt - dstmt,
        "F-COMLOC": lines.comment,
        "F-CCR": _ratio(lines.comment, lines.code),
    }


def coupling_metrics(unit: SyntaxUnit, project_index: ProjectIndex, path: str) -> tuple[int, int, int]:
    """(FI, FO, CR) by bare-name resolution over the project index."""
    key = (path, unit.qualified_name)
    called = project_index.calls.get(key)
    if called is None:
        called = _called_names(unit.node)
    fo = sum(1 for name in called if name != unit.name and project_index.functions.get(name))
    fi = sum(
        1
        for caller, names in project_index.calls.items()
        if caller != key and unit.name in names
    )
    return fi, fo, fi


def _is_constant_assignment(stmt: ast.stmt) -> bool:
    if isinstance(stmt, ast.Assign):
        targets = stmt.targets
    elif isinstance(stmt, ast.AnnAssign) and stmt.value is not None:
        targets = [stmt.target]
    else:
        return False
    return all(isinstance(t, ast.Name) and t.id.isupper() for t in targets)


def _magic_numbers(node: ast.AST) -> int:
    exempt_nodes = set()
    if isinstance(node, ast.Module):
        for stmt in node.body:
            if _is_constant_assignment(stmt):
                exempt_nodes.update(id(n) for n in ast.walk(stmt))
    count = 0
    for child in ast.walk(node):
        if (
            isinstance(child, ast.Constant)
            and isinstance(child.value, (int, float, complex))
            and not isinstance(child.value, bool)
            and id(child) not in exempt_nodes
            and child.value not in EXEMPT_NUMBERS
        ):
            count += 1
    return count


def python_specific(unit: SyntaxUnit) -> tuple[int, int]:
    """(PMI, PMN) for any unit; a unit's own body is indentation level 1."""
    node = unit.node
    if unit.kind == UnitKind.FILE:
        pmi = max(block_depth(node.body, 0), 0)
    else:
        pmi = block_depth(node.body, 1)
    return pmi, _magic_numbers(node)


# ---------------------------------------------------------------------------
# Rows


def product_metrics_row(
    root: SyntaxUnit,
    qualified_name: str,
    project_index: ProjectIndex | None = None,
    path: str = "",
) -> tuple[dict[str, float], int]:
    """Full product vector for one method plus its presence bitmask."""
    row = dict.fromkeys(PRODUCT_METRICS, 0.0)
    mask = 0
    unit = root.find(qualified_name, UnitKind.METHOD)
    if unit is not None:
        row.update(method_metrics(unit))
        if project_index is not None:
            fi, fo, cr = coupling_metrics(unit, project_index, path)
            row.update({"FI": fi, "FO": fo, "CR": cr})
        pmi, pmn = python_specific(unit)
        row.update({"PMI": pmi, "PMN": pmn})
        mask |= PRESENT_METHOD
        if unit.parent_class is not None:
            row.update(class_metrics(unit.parent_class, project_index, path))
            mask |= PRESENT_CLASS
    row.update(file_metrics(root))
    mask |= PRESENT_FILE
    return {k: float(row[k]) for k in PRODUCT_METRICS}, mask


def _innermost(methods: list[SyntaxUnit], line: int) -> SyntaxUnit | None:
    best = None
    for m in methods:
        start, end = m.source_span
        if start <= line <= end and (best is None or start >= best.source_span[0]):
            best = m
    return best


def changed_methods(
    source_before: str | None,
    source_after: str | None,
    deleted_lines: Iterable[int],
    added_lines: Iterable[int],
) -> list[str]:
    """
    Methods of the faulty version a fix touched: the innermost method around
    each deleted line, plus methods whose post-fix span received added lines.
    """
    if not source_before:
        return []
    try:
        before = parse_source(source_before)
    except UnparseableSourceError:
        return []
    before_methods = before.units(UnitKind.METHOD)
    names = {m.qualified_name for m in before_methods}
    hit = set()
    for line in set(deleted_lines):
        unit = _innermost(before_methods, line)
        if unit is not None:
            hit.add(unit.qualified_name)
    added = set(added_lines)
    if source_after and added:
        try:
            after_methods = parse_source(source_after).units(UnitKind.METHOD)
        except UnparseableSourceError:
            after_methods = []
        for line in added:
            unit = _innermost(after_methods, line)
            if unit is not None and unit.qualified_name in names:
                hit.add(unit.qualified_name)
    return sorted(hit)


def is_python_path(path: str | None) -> bool:
    return bool(path) and PurePosixPath(path).suffix == ".py"
