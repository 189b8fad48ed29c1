// implemented in later passes
