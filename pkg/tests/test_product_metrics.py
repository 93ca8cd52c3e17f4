"""
Tests for residual_faults.product_metrics against a hand-counted module.

tests/data/shape_module.py is the fixture; expected values below and the
full rows in tests/data/shape_module_metrics.csv were
counted by hand from that file.
"""
import math
import random
from pathlib import Path

import pandas as pd
import pytest

from residual_faults.catalog import PRESENT_CLASS, PRESENT_FILE, PRESENT_METHOD, PRODUCT_METRICS
from residual_faults.product_metrics import (
    NP_CAP,
    ProjectIndex,
    changed_methods,
    class_metrics,
    coupling_metrics,
    cyclomatic_complexity,
    file_metrics,
    halstead_counts,
    method_metrics,
    number_of_paths,
    product_metrics_row,
    python_specific,
)
from residual_faults.syntax import UnitKind, parse_source

DATA = Path(__file__).parent / "data"
SHAPE_MODULE = (DATA / "shape_module.py").read_text()
GOLDEN_METRICS = DATA / "shape_module_metrics.csv"


@pytest.fixture
def shape_root():
    return parse_source(SHAPE_MODULE)


@pytest.fixture
def shape_index(shape_root):
    index = ProjectIndex()
    index.add("shape_module.py", shape_root)
    return index


def _method(source, name="f"):
    return parse_source(source).find(name)


class TestMethodMetrics:
    """Method slice of Shape.area."""

    def test_control_flow(self, shape_root):
        row = method_metrics(shape_root.find("Shape.area"))
        assert row["CC"] == 6
        assert row["MND"] == 2
        assert row["NP"] == 9

    def test_halstead_counts(self, shape_root):
        row = method_metrics(shape_root.find("Shape.area"))
        assert row["HDOP"] == 16
        assert row["HDND"] == 12
        assert row["HTOP"] == 26
        assert row["HTOA"] == 21
        assert row["HV"] == 28
        assert row["HL"] == 47
        assert row["HVOL"] == pytest.approx(47 * math.log2(28))
        assert row["HD"] == pytest.approx(8 * 21 / 12)
        assert row["HEFF"] == pytest.approx(row["HD"] * row["HVOL"])

    def test_maintainability_index(self, shape_root):
        row = method_metrics(shape_root.find("Shape.area"))
        expected = 171 - 5.2 * math.log(47 * math.log2(28)) - 0.23 * 6 - 16.2 * math.log(10)
        assert row["HMI"] == pytest.approx(expected)

    def test_lines_and_statements(self, shape_root):
        row = method_metrics(shape_root.find("Shape.area"))
        assert row["LOC"] == 10
        assert row["BLOC"] == 0
        assert row["COMLOC"] == 1
        assert row["DLOC"] == 1
        assert row["ELOC"] == 8
        assert row["STMT"] == 9
        assert row["DSTMT"] == 1
        assert row["ESTMT"] == 8
        assert row["CLWB"] == 1
        assert row["CCR"] == pytest.approx(1 / 9)
        assert row["CCR-B"] == pytest.approx(1 / 9)

    def test_inputs_outputs_exits(self, shape_root):
        row = method_metrics(shape_root.find("Shape.area"))
        assert row["NIN"] == 1
        assert row["NOUT"] == 3
        assert row["NE"] == 4
        assert row["NEE"] == 3

    def test_python_specific(self, shape_root):
        assert python_specific(shape_root.find("Shape.area")) == (3, 1)

    def test_rejects_non_method_unit(self, shape_root):
        with pytest.raises(ValueError):
            method_metrics(shape_root.find("Shape", UnitKind.CLASS))

    def test_nested_function_bodies_are_excluded(self):
        unit = _method("def f(a):\n    def g(b):\n        if b:\n            return 1\n        return 2\n    return g\n")
        row = method_metrics(unit)
        assert row["CC"] == 1
        assert row["NOUT"] == 1
        assert row["NE"] == 1


class TestControlFlow:
    """CC and NP on small programs."""

    def test_match_with_wildcard(self):
        source = (
            "def f(x):\n"
            "    match x:\n"
            "        case 1:\n"
            "            return 'a'\n"
            "        case 2:\n"
            "            return 'b'\n"
            "        case _:\n"
            "            return 'c'\n"
        )
        unit = _method(source)
        assert cyclomatic_complexity(unit.node) == 3
        assert number_of_paths(unit.node) == 3

    def test_match_guard_counts(self):
        source = "def f(x):\n    match x:\n        case int(n) if n > 0:\n            return n\n    return 0\n"
        assert cyclomatic_complexity(_method(source).node) == 3

    def test_comprehension_filters_and_ternary(self):
        unit = _method("def f(xs):\n    return [x for x in xs if x if x > 1] if xs else []\n")
        assert cyclomatic_complexity(unit.node) == 4

    def test_paths_are_capped(self):
        body = "".join(f"    if a:\n        a = {i}\n" for i in range(21))
        unit = _method("def f(a):\n" + body)
        assert number_of_paths(unit.node) == NP_CAP

    def test_try_paths(self):
        source = "def f():\n    try:\n        g()\n    except KeyError:\n        pass\n    except ValueError:\n        pass\n"
        assert number_of_paths(_method(source).node) == 3

    def test_straight_line_method(self):
        unit = _method("def f():\n    a = 1\n    return a\n")
        assert cyclomatic_complexity(unit.node) == 1
        assert number_of_paths(unit.node) == 1


class TestHalstead:
    """Token classification for Halstead counts."""

    def test_simple_assignment(self):
        h = halstead_counts("x = x + 1")
        assert (h.distinct_operators, h.total_operators) == (2, 2)
        assert (h.distinct_operands, h.total_operands) == (2, 3)

    def test_bracket_pair_counts_once(self):
        h = halstead_counts("f(x)")
        assert h.total_operators == 1

    def test_constants_are_operands(self):
        h = halstead_counts("x = None")
        assert h.total_operands == 2
        assert h.total_operators == 1

    def test_docstring_is_ignored(self):
        with_doc = halstead_counts('def f():\n    """doc"""\n    return 1\n')
        without = halstead_counts("def f():\n    return 1\n")
        assert with_doc == without

    def test_empty_fragment(self):
        h = halstead_counts("")
        assert h.volume == 0.0
        assert h.difficulty == 0.0


class TestClassMetrics:
    """Class slice of Shape."""

    def test_lines(self, shape_root, shape_index):
        row = class_metrics(shape_root.find("Shape", UnitKind.CLASS), shape_index, "shape_module.py")
        assert row["CLLOC"] == 16
        assert row["CCODE"] == 12
        assert row["CDLOC"] == 3
        assert row["CELOC"] == 9
        assert row["CCOM"] == 2
        assert row["CCR-C"] == pytest.approx(2 / 12)

    def test_members_and_hierarchy(self, shape_root, shape_index):
        row = class_metrics(shape_root.find("Shape", UnitKind.CLASS), shape_index, "shape_module.py")
        assert row["NOM"] == 2
        assert row["NOM-A"] == 2
        assert row["NIV"] == 1
        assert row["DIT"] == 2
        assert row["BCs"] == 1
        assert row["DCs"] == 0

    def test_base_class_has_one_subclass(self, shape_root, shape_index):
        row = class_metrics(shape_root.find("Base", UnitKind.CLASS), shape_index, "shape_module.py")
        assert row["DIT"] == 1
        assert row["DCs"] == 1

    def test_without_index(self, shape_root):
        row = class_metrics(shape_root.find("Shape", UnitKind.CLASS))
        assert (row["DIT"], row["DCs"]) == (1, 0)

    def test_class_attributes_are_instance_variables(self):
        root = parse_source("class C:\n    a = 1\n    b: int = 2\n    f = lambda self: 0\n")
        assert class_metrics(root.find("C", UnitKind.CLASS))["NIV"] == 2

    def test_functions_inside_methods_are_not_methods(self):
        root = parse_source(
            "class Outer:\n"
            "    def run(self):\n"
            "        def step():\n"
            "            return 1\n"
            "        return step()\n"
            "\n"
            "    def stop(self):\n"
            "        pass\n"
            "\n"
            "    class Config:\n"
            "        def load(self):\n"
            "            pass\n"
        )
        row = class_metrics(root.find("Outer", UnitKind.CLASS))
        assert row["NOM"] == 3
        assert row["NOM-A"] == 2


class TestFileMetrics:
    """File slice of shape_module.py."""

    def test_values(self, shape_root):
        row = file_metrics(shape_root)
        assert row["F-CC"] == 8
        assert row["F-MND"] == 2
        assert row["F-NPLOG"] == pytest.approx(math.log10(12))
        assert row["F-TLOC"] == 28
        assert row["F-CLOC"] == 17
        assert row["F-BLOC"] == 8
        assert row["F-COMLOC"] == 3
        assert row["F-CCR"] == pytest.approx(3 / 17)
        assert row["F-STMT"] == 19
        assert row["F-DSTMT"] == 6
        assert row["F-ESTMT"] == 13

    def test_rejects_method_unit(self, shape_root):
        with pytest.raises(ValueError):
            file_metrics(shape_root.find("helper"))


class TestCoupling:
    """Fan-in/fan-out by bare-name resolution."""

    def test_fan_in_and_out(self):
        source = "def a():\n    return b() + c()\n\ndef b():\n    return c()\n\ndef c():\n    return len([])\n"
        root = parse_source(source)
        index = ProjectIndex()
        index.add("m.py", root)
        assert coupling_metrics(root.find("a"), index, "m.py") == (0, 2, 0)
        assert coupling_metrics(root.find("c"), index, "m.py") == (2, 0, 2)

    def test_index_skips_unparseable_files(self):
        index = ProjectIndex.build({"ok.py": "def f():\n    pass\n", "bad.py": "def (:\n"})
        assert index.skipped_files == 1
        assert "ok.py" in index.files


class TestProductRow:
    """Full rows and presence masks."""

    def test_method_in_class(self, shape_root, shape_index):
        row, mask = product_metrics_row(shape_root, "Shape.area", shape_index, "shape_module.py")
        assert list(row) == list(PRODUCT_METRICS)
        assert mask == PRESENT_METHOD | PRESENT_CLASS | PRESENT_FILE
        assert row["CC"] == 6.0
        assert row["CLLOC"] == 16.0
        assert row["PMI"] == 3.0

    def test_free_function_has_zero_class_slice(self, shape_root):
        row, mask = product_metrics_row(shape_root, "helper")
        assert mask == PRESENT_METHOD | PRESENT_FILE
        assert row["CLLOC"] == 0.0
        assert row["F-TLOC"] == 28.0

    def test_missing_method(self, shape_root):
        row, mask = product_metrics_row(shape_root, "nope")
        assert mask == PRESENT_FILE
        assert row["CC"] == 0.0

    @pytest.mark.parametrize("method", ["Shape.__init__", "Shape.area", "helper"])
    def test_matches_golden_rows(self, shape_root, shape_index, method):
        golden = pd.read_csv(GOLDEN_METRICS, index_col="method")
        assert tuple(golden.columns) == PRODUCT_METRICS
        row, _ = product_metrics_row(shape_root, method, shape_index, "shape_module.py")
        expected = golden.loc[method]
        for column in PRODUCT_METRICS:
            assert row[column] == pytest.approx(expected[column], rel=1e-12, abs=1e-12), column

    def test_generated_programs_stay_consistent(self):
        rng = random.Random(7)
        statements = ["x = 1", "if x:\n        x += 1", "for i in y:\n        x = i", "return x", "# note", ""]
        for _ in range(100):
            body = "\n    ".join(rng.choice(statements) for _ in range(rng.randint(1, 8)))
            root = parse_source(f"def f(y):\n    x = 0\n    {body}\n")
            row, mask = product_metrics_row(root, "f")
            assert mask & PRESENT_METHOD
            assert row["CC"] >= 1
            assert row["NP"] >= 1
            assert row["HV"] == row["HDOP"] + row["HDND"]
            assert row["HL"] == row["HTOP"] + row["HTOA"]
            assert row["HVOL"] == pytest.approx(row["HL"] * math.log2(row["HV"]))
            assert row["HEFF"] == pytest.approx(row["HD"] * row["HVOL"])
            assert row["LOC"] == row["BLOC"] + row["COMLOC"] + row["DLOC"] + row["ELOC"]
            assert 0.0 <= row["HMI"] <= 171.0


class TestChangedMethods:
    """Methods a fix touched."""

    BEFORE = "def a():\n    return 1\n\n\ndef b():\n    return 2\n"

    def test_deleted_lines(self):
        assert changed_methods(self.BEFORE, None, [2], []) == ["a"]

    def test_added_lines_map_through_post_fix_spans(self):
        after ="def a():\n    return 1\n\n\ndef b():\n    y = 3\n    return 2\n"
        assert changed_methods(self.BEFORE, after, [], [6]) == ["b"]

    def test_new_methods_are_ignored(self):
        after = self.BEFORE + "\n\ndef c():\n    return 3\n"
        assert changed_methods(self.BEFORE, after, [], [9, 10]) == []

    def test_no_source_before(self):
        assert changed_methods(None, "def a():\n    pass\n", [], [1]) == []

    def test_lines_outside_methods(self):
        assert changed_methods("import os\n\ndef a():\n    pass\n", None, [1], []) == []
