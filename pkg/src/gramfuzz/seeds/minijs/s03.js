var a = 3;
var b = 4;
print(a * b + 2);
