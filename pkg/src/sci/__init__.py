"""sci: a curation engine for hierarchical event schemas.

Library layout:

- :mod:`sci.sdf` -- document model, parse/serialize, structural validation
- :mod:`sci.edits` -- validated, logged, replayable edit commands
- :mod:`sci.induction` -- three-round automatic schema induction pipeline
- :mod:`sci.instantiation` -- unmatched-event processing and coverage stats
- :mod:`sci.graph` -- graph-view topology and DOT export
- :mod:`sci.report` -- figure rendering for stats and worklists
- :mod:`sci.service` -- HTTP API for interactive curation
- :mod:`sci.cli` -- the ``sci`` command-line tool
"""

__version__ = "0.1.0"
