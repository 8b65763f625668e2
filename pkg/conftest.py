# The project package is named ``code``, which collides with the standard
# library module of the same name that pytest imports early. Put the
# repository root first on sys.path and drop the cached stdlib module so
# ``import code.<module>`` resolves to this package.
import sys
from pathlib import Path

_ROOT = str(Path(__file__).resolve().parent)
if _ROOT in sys.path:
    sys.path.remove(_ROOT)
sys.path.insert(0, _ROOT)

_cached = sys.modules.get("code")
if _cached is not None and not hasattr(_cached, "__path__"):
    del sys.modules["code"]
