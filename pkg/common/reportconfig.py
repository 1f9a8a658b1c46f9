import csv
import json
import os
import sys

import numpy as np

from common import __version__


def plain(value):
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "to_dict"):
        return plain(value.to_dict())
    return value


class ReportConfig:

    def __init__(self, configfilepath=None):
        self.configFilePath = configfilepath
        self.data = {}

    def buildReport(self, command, config, results):
        """
        Build the report JSON: schema version, the resolved configuration and the results.
        """
        self.data = {
            "spec_version": __version__,
            "command": command,
            "config": plain(config or {}),
            "results": plain(results),
        }
        return self.data

    def writeReport(self, command, config, results, stream=None):
        self.buildReport(command, config, results)
        if stream is not None:
            stream.write(self.dumps())
        else:
            self.writeConfig()

    def dumps(self):
        return json.dumps(self.data, indent=4) + "\n"

    def writeConfig(self):
        parent = os.path.dirname(os.path.abspath(self.configFilePath))
        os.makedirs(parent, exist_ok=True)
        with open(self.configFilePath, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    def getResults(self):
        return self.data.get("results", {})


def emit_report(results, path=None, command="", config=None, stream=None):
    """Write the report to path, or to stream when no path is given."""
    if path is None and stream is None:
        stream = sys.stdout
    report = ReportConfig(path)
    report.writeReport(command, config, results, stream if path is None else None)
    return report


def write_csv(path, header, rows):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_rows(f, header, rows)


def write_rows(f, header, rows):
    """Numbers with 12 significant digits, LF line endings."""
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return value
