import os
import sys
from pathlib import Path

# Tests reference the golden corpus as scenarios/<name>.scn and import the
# shared generators as a plain module.
ROOT = Path(__file__).resolve().parent.parent
os.chdir(ROOT)
sys.path.insert(0, str(Path(__file__).resolve().parent))
