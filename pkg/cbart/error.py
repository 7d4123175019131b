class CbartError(Exception):
    """An Error during vocabulary building, synthesis, training or
    generation"""

    class ERROR:
        """Severity level of an Exception

        * **DATA**:     Malformed input data (corpus, dataset, vocab,
                        constraints file)
        * **USAGE**:    Bad flags or configuration values
        * **RUNTIME**:  The pipeline failed while running (divergence,
                        I/O, corrupted checkpoint)
        """

        DATA, USAGE, RUNTIME = 5, 10, 20

    def __init__(self, reason, severity):
        """
        :param reason: Human readable string suitable for logging

        :param severity: denoting what kind of failure this is. The
               command line front door maps ERROR.USAGE to exit code 1
               and everything else to exit code 2.

        :type severity: CbartError.ERROR value"""

        self.severity = severity

        # 'reason' is stored in the Exception().args tuple.
        super(CbartError, self).__init__(reason)

    @property
    def reason(self):
        return self.args[0]

    @property
    def exitcode(self):
        if self.severity == CbartError.ERROR.USAGE:
            return 1
        return 2
