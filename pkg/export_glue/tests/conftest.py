import sys
from pathlib import Path

GLUE_DIR = Path(__file__).resolve().parents[1]
if str(GLUE_DIR) not in sys.path:
    sys.path.insert(0, str(GLUE_DIR))
