"""Output directory holding one file group per discovered end state."""

from __future__ import annotations

import os
import random
import string
from pathlib import Path
from typing import Dict, Optional, Union

_ALPHABET = string.ascii_lowercase + string.digits


class Workspace:
    """``test_NNNNNNNN.<suffix>`` files plus run-global files.

    Test ids are claimed by exclusively creating the ``.messages`` file,
    which keeps numbering dense and collision free across worker processes.
    """

    def __init__(self, path: Union[str, os.PathLike, None] = None, parent: Union[str, os.PathLike] = "."):
        if path is None:
            rng = random.SystemRandom()
            while True:
                name = "mcore_" + "".join(rng.choice(_ALPHABET) for _ in range(6))
                candidate = Path(parent) / name
                try:
                    candidate.mkdir(parents=True)
                    break
                except FileExistsError:
                    continue
            self.path = candidate
        else:
            self.path = Path(path)
            self.path.mkdir(parents=True, exist_ok=True)
        self._hint = 0

    def __repr__(self):
        return f"Workspace({str(self.path)!r})"

    def testcase_path(self, test_id: int, suffix: str) -> Path:
        return self.path / f"test_{test_id:08d}.{suffix.lstrip('.')}"

    def _claim(self, data: bytes) -> int:
        i = self._hint
        while True:
            target = self.testcase_path(i, "messages")
            try:
                fd = os.open(target, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
            except FileExistsError:
                i += 1
                continue
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            self._hint = i + 1
            return i

    def save_testcase(self, files: Dict[str, Union[str, bytes]]) -> int:
        """Write one file group and return its id."""
        files = {k.lstrip("."): (v.encode() if isinstance(v, str) else v) for k, v in files.items()}
        test_id = self._claim(files.pop("messages", b""))
        for suffix, data in files.items():
            self.testcase_path(test_id, suffix).write_bytes(data)
        return test_id

    def testcase_ids(self) -> list:
        ids = []
        for p in self.path.glob("test_*.messages"):
            try:
                ids.append(int(p.name[5:13]))
            except ValueError:
                continue
        return sorted(ids)

    def read(self, test_id: int, suffix: str, binary: bool = False):
        p = self.testcase_path(test_id, suffix)
        return p.read_bytes() if binary else p.read_text()

    def write(self, name: str, data: Union[str, bytes]) -> Path:
        p = self.path / name
        p.write_bytes(data.encode() if isinstance(data, str) else data)
        return p

    def append(self, name: str, line: str) -> None:
        # O_APPEND keeps single small writes from different workers intact
        fd = os.open(self.path / name, os.O_CREAT | os.O_APPEND | os.O_WRONLY, 0o644)
        try:
            os.write(fd, (line.rstrip("\n") + "\n").encode())
        finally:
            os.close(fd)

    def exists(self, name: str) -> bool:
        return (self.path / name).exists()


def open_workspace(path: Optional[str]) -> Workspace:
    return Workspace(path)
