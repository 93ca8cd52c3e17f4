"""
The software metric catalog: acronyms and their column order.

Every CSV the pipeline writes uses these tuples for its column order, so the
feature header is fixed regardless of how rows were produced.
"""

METHOD_METRICS = (
    "CC", "MND", "NP", "HD", "HL", "HV", "HVOL", "HEFF", "HMI", "HDOP", "HDND",
    "HTOP", "HTOA", "LOC", "BLOC", "DLOC", "ELOC", "STMT", "DSTMT", "ESTMT",
    "NIN", "NOUT", "NE", "NEE", "COMLOC", "CCR", "CLWB", "CCR-B", "FI", "FO", "CR",
)

CLASS_METRICS = (
    "CLLOC", "CCODE", "CDLOC", "CELOC", "NOM", "NOM-A", "NIV", "CCOM", "CCR-C",
    "DIT", "BCs", "DCs",
)

FILE_METRICS = (
    "F-CC", "F-MND", "F-NPLOG", "F-TLOC", "F-CLOC", "F-BLOC", "F-STMT",
    "F-DSTMT", "F-ESTMT", "F-COMLOC", "F-CCR",
)

PYTHON_METRICS = ("PMI", "PMN")

PRODUCT_METRICS = METHOD_METRICS + CLASS_METRICS + FILE_METRICS + PYTHON_METRICS

STATISTICAL_METRICS = ("ENT",)

PROCESS_METRICS = (
    # temporal
    "AGE", "BD", "FC",
    # churn
    "ACCH", "MCCH", "TCCH", "TMS",
    # commit
    "TC", "CMC", "MCLC", "ACLC", "TCC", "CCA", "CCD", "CPC",
    # method
    "MCA", "MCD", "TMC", "AMLC", "MMLC",
    # developer
    "DA", "ADE", "DCN", "ACA", "ACCA",
)

FEATURE_COLUMNS = PRODUCT_METRICS + STATISTICAL_METRICS + PROCESS_METRICS

KEY_COLUMNS = ("repo_id", "commit_id", "method")

# Presence bitmask bits for product rows.
PRESENT_METHOD = 1
PRESENT_CLASS = 2
PRESENT_FILE = 4
