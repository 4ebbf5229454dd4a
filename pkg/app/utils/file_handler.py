# app/utils/file_handler.py

import logging
import os
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from app.core.sc_decoder import ChannelPriors
from app.core.simulation import CSV_COLUMNS

logger = logging.getLogger(__name__)


def save_to_csv(data: Union[pd.DataFrame, List[Dict[str, Any]]], output_path: str, filename: str) -> str:
    """
    Saves simulation rows to a CSV file using pandas.

    Args:
        data: A DataFrame or a list of row dictionaries.
        output_path: The directory where the file will be saved (e.g., 'results').
        filename: The name of the file (e.g., 'wer_256.csv').

    Returns:
        The full path of the written file.
    """
    df = data if isinstance(data, pd.DataFrame) else pd.DataFrame(data)
    if df.empty:
        logger.warning("no rows to save, writing a header-only file")

    if output_path:
        os.makedirs(output_path, exist_ok=True)
    full_path = os.path.join(output_path, filename)

    # Known columns first, in the documented order; anything else after them.
    column_order = [col for col in CSV_COLUMNS if col in df.columns]
    column_order += [col for col in df.columns if col not in column_order]
    df[column_order].to_csv(full_path, index=False, encoding="utf-8", lineterminator="\n")

    logger.info("saved %d rows to %s", len(df), full_path)
    return full_path


def save_text(text: str, full_path: str) -> str:
    """Writes `text` to `full_path`, creating its directory."""
    directory = os.path.dirname(full_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(full_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return full_path


def format_priors(priors: ChannelPriors) -> str:
    """One "w0 w1" line per position, in the format the priors parser reads."""
    return "".join(f"{w0!r} {w1!r}\n" for w0, w1 in np.asarray(priors.likelihoods, dtype=float).tolist())


def save_priors(priors: ChannelPriors, full_path: str) -> str:
    return save_text(format_priors(priors), full_path)
