"""Order pricing helpers."""


def calculate_total(items):
    return sum(item.price for item in items)


def apply_discount(total, discount_percent):
    return total * (1 - discount_percent / 100)


def process_order(items, discount_percent=0):
    total = calculate_total(items)
    final_price = apply_discount(total, discount_percent)
    return final_price
