def broken(:
    return

class Also broken
    pass
