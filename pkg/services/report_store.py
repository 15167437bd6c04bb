import logging
import os
from typing import Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from models import ExperimentReport, TriangleRecord

logger = logging.getLogger(__name__)


class ReportStore:
    """
    File-based storage for experiment reports, scatter data and golden word lists
    """
    def __init__(self, storage_dir: Optional[str] = None):
        self.storage_dir = storage_dir or "reports"

    def use(self, storage_dir: str):
        """Point the store at another output directory"""
        self.storage_dir = storage_dir

    def ensure_storage_dir(self):
        """Create the output directory if it doesn't exist"""
        if not os.path.exists(self.storage_dir):
            os.makedirs(self.storage_dir)
            logger.info(f"📁 Created report directory: {self.storage_dir}")

    def get_file_path(self, name: str, suffix: str) -> str:
        # Clean name for filename (keep letters, digits, '-' and '_')
        clean_name = "".join(c for c in name if c.isalnum() or c in ('-', '_'))
        return os.path.join(self.storage_dir, f"{clean_name}{suffix}")

    def save_report(self, report: ExperimentReport) -> str:
        """Write the report as JSON; the schema version is dumped under the key 'schema'"""
        self.ensure_storage_dir()
        file_path = self.get_file_path(report.experiment, ".json")
        with open(file_path, 'w', encoding='utf-8') as f:
            f.write(report.model_dump_json(by_alias=True, indent=2))
        logger.info(f"💾 Saved report to {file_path}")
        return file_path

    def load_report(self, experiment: str) -> Optional[ExperimentReport]:
        file_path = self.get_file_path(experiment, ".json")
        if not os.path.exists(file_path):
            return None
        with open(file_path, 'r', encoding='utf-8') as f:
            return ExperimentReport.model_validate_json(f.read())

    def save_scatter(self, name: str, triangles: Sequence[TriangleRecord]) -> str:
        """Scatter of (norm, width, certified bound) per triangle, as CSV"""
        self.ensure_storage_dir()
        file_path = self.get_file_path(name, ".csv")
        df = pd.DataFrame(
            [t.model_dump() for t in triangles],
            columns=["word", "length", "norm", "width", "certified_bound"],
        )
        df.to_csv(file_path, index=False)
        logger.info(f"📊 Saved {len(df)} scatter rows to {file_path}")
        return file_path

    def load_scatter(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self.get_file_path(name, ".csv"), keep_default_na=False)

    def save_words(self, name: str, words: Iterable[str]) -> str:
        """Golden word list, one word per line"""
        self.ensure_storage_dir()
        file_path = self.get_file_path(name, ".txt")
        lines = list(words)
        with open(file_path, 'w', encoding='utf-8') as f:
            f.writelines(f"{w}\n" for w in lines)
        logger.info(f"💾 Saved {len(lines)} words to {file_path}")
        return file_path

    def save_pairs(self, name: str, pairs: Iterable[Tuple[str, str]]) -> str:
        """Relation as tab-separated u<TAB>v lines"""
        self.ensure_storage_dir()
        file_path = self.get_file_path(name, ".tsv")
        rows = list(pairs)
        with open(file_path, 'w', encoding='utf-8') as f:
            f.writelines(f"{u}\t{v}\n" for u, v in rows)
        logger.info(f"💾 Saved {len(rows)} pairs to {file_path}")
        return file_path

    def load_lines(self, name: str, suffix: str) -> List[str]:
        with open(self.get_file_path(name, suffix), 'r', encoding='utf-8') as f:
            return [line.rstrip("\n") for line in f]


# Global report store instance
report_store = ReportStore()
