# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from typing import List, Sequence, Tuple

from voxhand.errors import UnknownSubject

Split = Tuple[List[str], List[str]]


def loso_split(subjects: Sequence[str], held_out: str) -> Split:
    """Leave-one-subject-out split.

    Args:
        subjects (Sequence[str]): All subject ids.
        held_out (str): Subject to test on.

    Returns:
        Split: (training subjects, [held_out]), disjoint and exhaustive.

    Raises:
        UnknownSubject: If `held_out` is not in `subjects`.
    """
    if held_out not in subjects:
        raise UnknownSubject(
            f"Held-out subject {held_out!r} is not one of {list(subjects)}."
        )
    return [s for s in subjects if s != held_out], [held_out]


def loso_folds(subjects: Sequence[str]) -> List[Split]:
    """
    Args:
        subjects (Sequence[str]): All subject ids.

    Returns:
        List[Split]: One split per subject; every subject is tested exactly once.
    """
    return [loso_split(subjects, s) for s in subjects]
