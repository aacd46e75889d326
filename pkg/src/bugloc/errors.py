"""Exception type shared by every module.

Each error carries a short machine-readable ``code`` (``"missing-file"``,
``"stale-cache"``, ...) so callers and the command line can branch on it
without parsing messages.
"""


class BugLocError(Exception):
    def __init__(self, code, message=""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)
