"""Pass/fail lines of the acceptance criteria, printed again in the terminal summary."""

LINES = []
