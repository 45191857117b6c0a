// numbers round-trip through text
var n = num("42");
print(str(n + 1));
