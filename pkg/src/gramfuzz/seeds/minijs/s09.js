var p = 2;
var q = 3;
print(p == q);
print(p != q);
