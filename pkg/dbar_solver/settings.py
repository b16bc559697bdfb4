"""
Runtime settings and logging bootstrap.

Only *where* things go is configured here (log directory, ledger path).
Values come from the project's `.env` file via `dotenv_values`, which reads the
file itself and never the process environment. Numerical parameters live in
the JSON RunConfig (see config.py).
"""
import logging
import os

from dotenv import dotenv_values
from rich.logging import RichHandler

env_vars = dotenv_values(".env")

LOG_DIR = env_vars.get("DBAR_LOG_DIR") or "logs"
LOG_LEVEL = (env_vars.get("DBAR_LOG_LEVEL") or "INFO").upper()
LEDGER_PATH = env_vars.get("DBAR_LEDGER_PATH") or os.path.join("data_base", "runs.db")

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def configure_logging(log_dir: str = LOG_DIR, level: str = LOG_LEVEL) -> str:
    """File log for the whole run, warnings echoed to the console."""
    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, "dbarsolver.log")

    console = RichHandler(level=logging.WARNING, show_path=False, markup=False)
    logging.basicConfig(
        filename=log_file,
        level=getattr(logging, level, logging.INFO),
        format=LOG_FORMAT,
    )
    root = logging.getLogger()
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(console)
    return log_file
