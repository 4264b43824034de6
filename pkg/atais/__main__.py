"""Allow ``python -m atais``."""

from .cli import main

raise SystemExit(main())
